/** @file test_cli.cpp
 *  @brief Tests for the config parser, snapshot/CSV round trips, and the
 *         command-line binary (exit codes, determinism, restart consistency).
 */
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fpsi/config.hpp"
#include "fpsi/diagnostics.hpp"
#include "fpsi/errors.hpp"
#include "fpsi/io.hpp"
#include "fpsi/stepper.hpp"

using namespace fpsi;
namespace fs = std::filesystem;

namespace {

/// Scratch directory rooted under the system temp path, removed on scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("fpsi_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  REQUIRE(out.good());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Run the installed binary; returns its exit code, captures merged output.
int run_cli(const std::string& args, std::string* output = nullptr) {
  const std::string out_path =
      (fs::temp_directory_path() / "fpsi_cli_capture.txt").string();
  const std::string cmd = std::string(FPSI_CLI_PATH) + " " + args + " > " + out_path +
                          " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (output) *output = read_file(out_path);
  std::remove(out_path.c_str());
  if (rc == -1) return -1;
  return WEXITSTATUS(rc);
}

const char* kBaseConfig = R"(# exercised by the CLI tests
[domain]
d_plane = 1
[discretization]
M = 2
fluid_elems = 4
plate_elems = 4
biot_elems = 4
[initial]
kind = random
seed = 7
[run]
T = 0.2
N = 8
)";

std::string with_output_dir(const std::string& base, const std::string& dir,
                            int cadence = 0) {
  std::string cfg = base;
  cfg += "[output]\ndir = " + dir + "\n";
  if (cadence > 0) cfg += "cadence = " + std::to_string(cadence) + "\n";
  return cfg;
}

} // namespace

// ===========================================================================
// Config parsing
// ===========================================================================

TEST_CASE("config parser accepts a full configuration") {
  const RunConfig cfg = parse_config_text(R"(
[domain]
d_plane = 2
h = 0.2
[discretization]
M = 3
fluid_elems = 5
plate_elems = 6
biot_elems = 7
[params]
mode = quasistatic-nonlinear
rho_b = 0
mu_f = 2.5
D = 3.0
[permeability]
model = nonlinear
response = 1 + 0.5*((exp(z) - exp(-z))/(exp(z) + exp(-z)))
k_min = 0.25
k_max = 2.0
[sources]
kind = expr
f_x1 = sin(x1)
f_x2 = 0
f_x3 = cos(x2)*exp(-t)
S = 0.1
[initial]
kind = zero
[run]
T = 0.5
N = 10
tol = 1e-11
strict = true
[output]
dir = results
cadence = 2
)");
  CHECK(cfg.domain.d_plane == 2);
  CHECK(cfg.domain.h == doctest::Approx(0.2));
  CHECK(cfg.M == 3);
  CHECK(cfg.fluid_elems == 5);
  CHECK(cfg.plate_elems == 6);
  CHECK(cfg.biot_elems == 7);
  CHECK(cfg.params.mode == RunMode::QuasistaticNonlinear);
  CHECK(cfg.params.rho_b == 0.0);
  CHECK(cfg.params.mu_f == doctest::Approx(2.5));
  CHECK(cfg.params.D_bend == doctest::Approx(3.0));
  CHECK(cfg.perm.kind == PermeabilityKind::Nonlinear);
  CHECK(cfg.perm.k_min == doctest::Approx(0.25));
  CHECK(cfg.source_kind == SourceKind::Expressions);
  CHECK(cfg.T == doctest::Approx(0.5));
  CHECK(cfg.N == 10);
  CHECK(cfg.solver.tol == doctest::Approx(1e-11));
  CHECK(cfg.strict);
  CHECK(cfg.out_dir == "results");
  CHECK(cfg.cadence == 2);
  CHECK(snapshot_cadence(cfg) == 2);
}

TEST_CASE("config parser rejects malformed input with line numbers") {
  /// Unknown key.
  CHECK_THROWS_WITH_AS(parse_config_text("[run]\nT = 1\nN = 2\nbogus = 3\n"),
                       doctest::Contains("line 4"), ConfigError);
  /// Unknown section.
  CHECK_THROWS_WITH_AS(parse_config_text("[nope]\nx = 1\n"),
                       doctest::Contains("unknown section"), ConfigError);
  /// Duplicate key.
  CHECK_THROWS_WITH_AS(parse_config_text("[run]\nT = 1\nT = 2\n"),
                       doctest::Contains("duplicate"), ConfigError);
  /// Value outside the grammar.
  CHECK_THROWS_AS(parse_config_text("[run]\nT = banana\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[domain]\nd_plane = 3\n"), ConfigError);
  /// Key before any section header.
  CHECK_THROWS_AS(parse_config_text("T = 1\n"), ConfigError);
  /// Keys that contradict the selected kind.
  CHECK_THROWS_WITH_AS(
      parse_config_text("[permeability]\nmodel = constant\nresponse = z\n"),
      doctest::Contains("response"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[initial]\nkind = zero\nseed = 3\n"), ConfigError);
  /// Vanishing plate storage is rejected while parsing, not at run time.
  CHECK_THROWS_WITH_AS(parse_config_text("[params]\nc_p = 0\n"),
                       doctest::Contains("c_p > 0"), ConfigError);
}

TEST_CASE("config hash is stable for identical text and sensitive to changes") {
  const RunConfig a = parse_config_text("[run]\nT = 1\nN = 4\n");
  const RunConfig b = parse_config_text("[run]\nT = 1\nN = 4\n");
  const RunConfig c = parse_config_text("[run]\nT = 1\nN = 5\n");
  CHECK(a.config_hash == b.config_hash);
  CHECK(a.config_hash != c.config_hash);
}

// ===========================================================================
// Snapshot round trip
// ===========================================================================

TEST_CASE("snapshot write/read round trip preserves the state") {
  TempDir tmp("snapshot");
  DomainSpec dom;
  dom.d_plane = 1;
  const Discretization disc = build_discretization(dom, 2, 3, 3, 3);
  PlaneTransform tr(dom.d_plane, 2, disc.n_colloc);
  State s = random_admissible_state(disc, 99);
  s.t = 0.375;

  const std::string path = tmp.file("state.dat");
  write_snapshot(path, s, disc, tr, Provenance{0x1234, "dynamic-linear", ""});
  const State r = read_snapshot(path, disc, tr);

  CHECK(r.t == doctest::Approx(s.t).epsilon(1e-15));
  auto close = [](const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
    return (x - y).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, y.cwiseAbs().maxCoeff());
  };
  CHECK(close(r.u, s.u));
  CHECK(close(r.pf, s.pf));
  CHECK(close(r.w, s.w));
  CHECK(close(r.wdot, s.wdot));
  CHECK(close(r.pp, s.pp));
  CHECK(close(r.eta, s.eta));
  CHECK(close(r.etadot, s.etadot));
  CHECK(close(r.pb, s.pb));

  SUBCASE("mismatched discretization is rejected") {
    const Discretization other = build_discretization(dom, 2, 4, 3, 3);
    PlaneTransform otr(dom.d_plane, 2, other.n_colloc);
    CHECK_THROWS_AS(read_snapshot(path, other, otr), ConfigError);
  }

  SUBCASE("truncated file is rejected") {
    std::string text = read_file(path);
    write_file(tmp.file("cut.dat"), text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(read_snapshot(tmp.file("cut.dat"), disc, tr), ConfigError);
  }
}

// ===========================================================================
// Binary: exit codes and file contract
// ===========================================================================

TEST_CASE("cli rejects bad invocations and bad configs") {
  TempDir tmp("cli_errors");
  std::string out;
  CHECK(run_cli("", &out) == 2);
  CHECK(run_cli("run " + tmp.file("missing.cfg"), &out) == 2);

  write_file(tmp.file("cp0.cfg"), "[params]\nc_p = 0\n[run]\nT = 1\nN = 2\n");
  CHECK(run_cli("run " + tmp.file("cp0.cfg"), &out) == 2);
  /// The refusal names the violated requirement.
  CHECK(out.find("c_p > 0") != std::string::npos);

  write_file(tmp.file("badkey.cfg"), "[run]\nT = 1\nN = 2\nwhat = 3\n");
  CHECK(run_cli("run " + tmp.file("badkey.cfg"), &out) == 2);
  CHECK(out.find("what") != std::string::npos);

  /// --dt and --steps are mutually exclusive.
  write_file(tmp.file("ok.cfg"), with_output_dir(kBaseConfig, tmp.file("out")));
  CHECK(run_cli("run " + tmp.file("ok.cfg") + " --dt 0.1 --steps 4", &out) == 2);
}

TEST_CASE("cli run emits provenance-headed deterministic outputs") {
  TempDir tmp("cli_run");
  write_file(tmp.file("a.cfg"), with_output_dir(kBaseConfig, tmp.file("out_a"), 4));
  REQUIRE(run_cli("run " + tmp.file("a.cfg")) == 0);

  const std::string csv = read_file(tmp.file("out_a") + "/energy.csv");
  /// Provenance header: build version, then config hash and run mode.
  CHECK(csv.rfind("# fpsi ", 0) == 0);
  CHECK(csv.find("mode=dynamic-linear") != std::string::npos);
  CHECK(csv.find("step,t,") != std::string::npos);

  /// One row per step plus the initial row.
  int rows = 0;
  for (const char ch : csv)
    if (ch == '\n') ++rows;
  CHECK(rows == 2 + 1 + 9);

  /// Snapshot cadence 4 with N=8: n = 0, 4, 8.
  CHECK(fs::exists(tmp.file("out_a") + "/snapshot_000000.dat"));
  CHECK(fs::exists(tmp.file("out_a") + "/snapshot_000004.dat"));
  CHECK(fs::exists(tmp.file("out_a") + "/snapshot_000008.dat"));
  CHECK(!fs::exists(tmp.file("out_a") + "/snapshot_000002.dat"));

  SUBCASE("identical config and seed give byte-identical files") {
    write_file(tmp.file("b.cfg"), with_output_dir(kBaseConfig, tmp.file("out_b"), 4));
    REQUIRE(run_cli("run " + tmp.file("b.cfg")) == 0);
    /// The configs differ only in output directory, which is hashed; compare
    /// everything after the hash line.
    const std::string csv_b = read_file(tmp.file("out_b") + "/energy.csv");
    CHECK(csv.substr(csv.find("step,t,")) == csv_b.substr(csv_b.find("step,t,")));

    write_file(tmp.file("a2.cfg"), with_output_dir(kBaseConfig, tmp.file("out_a2"), 4));
    REQUIRE(run_cli("run " + tmp.file("a2.cfg")) == 0);
    const std::string snap_a = read_file(tmp.file("out_a") + "/snapshot_000008.dat");
    const std::string snap_a2 = read_file(tmp.file("out_a2") + "/snapshot_000008.dat");
    CHECK(snap_a.substr(snap_a.find("snapshot 1")) ==
          snap_a2.substr(snap_a2.find("snapshot 1")));
  }
}

TEST_CASE("cli zero-data run reports identically zero energies") {
  TempDir tmp("cli_zero");
  const std::string cfg = R"(
[domain]
d_plane = 1
[discretization]
M = 1
fluid_elems = 3
plate_elems = 3
biot_elems = 3
[run]
T = 0.1
N = 4
)";
  write_file(tmp.file("zero.cfg"), with_output_dir(cfg, tmp.file("out")));
  REQUIRE(run_cli("run " + tmp.file("zero.cfg")) == 0);

  /// Every energy and dissipation column is exactly zero on every row.
  std::istringstream csv(read_file(tmp.file("out") + "/energy.csv"));
  std::string line;
  int data_rows = 0;
  while (std::getline(csv, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("step,", 0) == 0) continue;
    ++data_rows;
    std::istringstream row(line);
    std::string cell;
    for (int col = 0; std::getline(row, cell, ','); ++col)
      if (col >= 2 && col <= 15) CHECK(std::stod(cell) == 0.0);
  }
  CHECK(data_rows == 5);

  SUBCASE("re-running the identical config reproduces the file byte for byte") {
    const std::string first = read_file(tmp.file("out") + "/energy.csv");
    REQUIRE(run_cli("run " + tmp.file("zero.cfg")) == 0);
    CHECK(read_file(tmp.file("out") + "/energy.csv") == first);
  }
}

TEST_CASE("cli restart from a snapshot matches the unsplit run") {
  TempDir tmp("cli_restart");
  /// Full horizon in one piece.
  write_file(tmp.file("full.cfg"), with_output_dir(kBaseConfig, tmp.file("full"), 4));
  REQUIRE(run_cli("run " + tmp.file("full.cfg")) == 0);

  /// First half, then resume from its final snapshot.
  std::string half = kBaseConfig;
  half.replace(half.find("T = 0.2"), 7, "T = 0.1");
  half.replace(half.find("N = 8"), 5, "N = 4");
  write_file(tmp.file("half.cfg"), with_output_dir(half, tmp.file("half"), 4));
  REQUIRE(run_cli("run " + tmp.file("half.cfg")) == 0);

  std::string resume = half;
  const std::string init_block = "[initial]\nkind = random\nseed = 7\n";
  const size_t at = resume.find(init_block);
  REQUIRE(at != std::string::npos);
  resume.replace(at, init_block.size(),
                 "[initial]\nkind = snapshot\nfile = " + tmp.file("half") +
                     "/snapshot_000004.dat\n");
  write_file(tmp.file("resume.cfg"), with_output_dir(resume, tmp.file("resume"), 4));
  REQUIRE(run_cli("run " + tmp.file("resume.cfg")) == 0);

  DomainSpec dom;
  dom.d_plane = 1;
  const Discretization disc = build_discretization(dom, 2, 4, 4, 4);
  PlaneTransform tr(dom.d_plane, 2, disc.n_colloc);
  const State full = read_snapshot(tmp.file("full") + "/snapshot_000008.dat", disc, tr);
  const State seam = read_snapshot(tmp.file("resume") + "/snapshot_000004.dat", disc, tr);
  CHECK(full.t == doctest::Approx(seam.t).epsilon(1e-12));
  const double scale = std::max(1.0, full.u.cwiseAbs().maxCoeff());
  CHECK((full.u - seam.u).cwiseAbs().maxCoeff() <= 1e-9 * scale);
  CHECK((full.w - seam.w).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((full.eta - seam.eta).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((full.pb - seam.pb).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("cli strict mode turns a corrupted restart into exit 4") {
  TempDir tmp("cli_corrupt");
  std::string half = kBaseConfig;
  half.replace(half.find("T = 0.2"), 7, "T = 0.1");
  half.replace(half.find("N = 8"), 5, "N = 4");
  write_file(tmp.file("half.cfg"), with_output_dir(half, tmp.file("half"), 4));
  REQUIRE(run_cli("run " + tmp.file("half.cfg")) == 0);

  /// Break the kinematic rate tie inside the stored plate-velocity row.
  std::string snap = read_file(tmp.file("half") + "/snapshot_000004.dat");
  const size_t field_at = snap.find("field wdot");
  REQUIRE(field_at != std::string::npos);
  const size_t row_at = snap.find('\n', field_at) + 1;
  snap.replace(row_at, snap.find(' ', row_at) - row_at, "7.25");
  write_file(tmp.file("corrupt.dat"), snap);

  std::string resume = half;
  const std::string init_block = "[initial]\nkind = random\nseed = 7\n";
  resume.replace(resume.find(init_block), init_block.size(),
                 "[initial]\nkind = snapshot\nfile = " + tmp.file("corrupt.dat") + "\n");
  write_file(tmp.file("resume.cfg"), with_output_dir(resume, tmp.file("resume")));

  std::string out;
  CHECK(run_cli("run " + tmp.file("resume.cfg") + " --strict", &out) == 4);
  CHECK(out.find("invariant violation") != std::string::npos);
  /// Without --strict the run proceeds on the corrupted data.
  CHECK(run_cli("run " + tmp.file("resume.cfg"), &out) == 0);
}

TEST_CASE("cli rejects initial expressions violating the interface ties") {
  TempDir tmp("cli_ties");
  std::string cfg = R"(
[domain]
d_plane = 1
[discretization]
M = 1
fluid_elems = 3
plate_elems = 3
biot_elems = 3
[initial]
kind = expr
w = 0.05*cos(6.283185307179586*x1)
[run]
T = 0.1
N = 2
)";
  write_file(tmp.file("bad.cfg"), with_output_dir(cfg, tmp.file("out")));
  std::string out;
  /// w != eta_z(x3=0) (eta defaults to zero): rejected as configuration error.
  CHECK(run_cli("run " + tmp.file("bad.cfg"), &out) == 2);
  CHECK(out.find("kinematic trace") != std::string::npos);
}

TEST_CASE("cli verify oracle and probe poincare succeed") {
  std::string out;
  CHECK(run_cli("verify oracle", &out) == 0);
  CHECK(out.find("PASS") != std::string::npos);
  CHECK(out.find("[FAIL]") == std::string::npos);

  TempDir tmp("cli_probe");
  write_file(tmp.file("p.cfg"), with_output_dir(kBaseConfig, tmp.file("out")));
  CHECK(run_cli("probe poincare " + tmp.file("p.cfg"), &out) == 0);
  CHECK(out.find("c_eta=") != std::string::npos);
  CHECK(out.find("divergent") != std::string::npos);
}

TEST_CASE("cli study dissipation writes member directories and the summary") {
  TempDir tmp("cli_study");
  std::string cfg = kBaseConfig;
  cfg.replace(cfg.find("N = 8"), 5, "N = 4");
  write_file(tmp.file("s.cfg"), with_output_dir(cfg, tmp.file("study")));
  std::string out;
  CHECK(run_cli("study dissipation " + tmp.file("s.cfg"), &out) == 0);
  CHECK(fs::exists(tmp.file("study") + "/run_N4/energy.csv"));
  CHECK(fs::exists(tmp.file("study") + "/run_N8/energy.csv"));
  const std::string csv = read_file(tmp.file("study") + "/dissipation.csv");
  CHECK(csv.find("N,dt,max_energy,total_dissipation") != std::string::npos);
}
