/** @file io.cpp
 *  @brief Snapshot and CSV writers/readers with provenance stamping.
 */
#include "fpsi/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace fpsi {

namespace {

// ===========================================================================
// Token-level helpers
// ===========================================================================

[[noreturn]] void corrupt(const std::string& path, const std::string& msg) {
  throw ConfigError("snapshot '" + path + "': " + msg);
}

/// Whitespace-token reader for the snapshot body (post-comment lines).
struct TokenReader {
  std::istream& in;
  const std::string& path;

  std::string next() {
    std::string t;
    if (!(in >> t)) corrupt(path, "truncated file");
    return t;
  }

  void expect(const char* literal) {
    const std::string t = next();
    if (t != literal)
      corrupt(path, "expected '" + std::string(literal) + "', found '" + t + "'");
  }

  double real() {
    const std::string t = next();
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() || *end != '\0')
      corrupt(path, "expected a number, found '" + t + "'");
    return v;
  }

  int integer() {
    const std::string t = next();
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (end == t.c_str() || *end != '\0' || errno == ERANGE)
      corrupt(path, "expected an integer, found '" + t + "'");
    return static_cast<int>(v);
  }
};

void check_header_int(const std::string& path, const char* name, int got, int want) {
  if (got != want)
    corrupt(path, std::string(name) + " mismatch: file has " + std::to_string(got) +
                      ", run expects " + std::to_string(want));
}

/// The stored fields in emission order: name, coefficient matrix, row count.
struct FieldSlot {
  const char* name;
  const Eigen::MatrixXcd* coeffs;
  Eigen::MatrixXcd* mutable_coeffs = nullptr;
};

std::vector<FieldSlot> field_slots(const State& s) {
  return {{"u", &s.u},       {"p_f", &s.pf},      {"w", &s.w},   {"wdot", &s.wdot},
          {"p_p", &s.pp},    {"eta", &s.eta},     {"etadot", &s.etadot},
          {"p_b", &s.pb}};
}

std::vector<FieldSlot> field_slots(State& s) {
  return {{"u", &s.u, &s.u},             {"p_f", &s.pf, &s.pf},
          {"w", &s.w, &s.w},             {"wdot", &s.wdot, &s.wdot},
          {"p_p", &s.pp, &s.pp},         {"eta", &s.eta, &s.eta},
          {"etadot", &s.etadot, &s.etadot}, {"p_b", &s.pb, &s.pb}};
}

void write_mesh_line(std::ostream& out, const char* name, const TransverseMesh& m) {
  out << "mesh " << name << ' ' << m.n_elem << ' ' << m.degree << '\n';
}

void read_mesh_line(TokenReader& r, const std::string& path, const char* name,
                    const TransverseMesh& m) {
  r.expect("mesh");
  r.expect(name);
  check_header_int(path, name, r.integer(), m.n_elem);
  check_header_int(path, (std::string(name) + " degree").c_str(), r.integer(), m.degree);
}

} // namespace

// ===========================================================================
// Provenance
// ===========================================================================

std::string build_version() {
#ifdef FPSI_BUILD_VERSION
  return FPSI_BUILD_VERSION;
#else
  return "0.0.0+untracked";
#endif
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string provenance_header(const Provenance& p) {
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(p.config_hash));
  std::string out = "# fpsi " + build_version() + "\n# config=" + hash +
                    " mode=" + (p.run_mode.empty() ? "-" : p.run_mode);
  if (!p.note.empty()) out += " " + p.note;
  out += "\n";
  return out;
}

// ===========================================================================
// Snapshots
// ===========================================================================

void write_snapshot(const std::string& path, const State& s, const Discretization& disc,
                    const PlaneTransform& tr, const Provenance& prov) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write snapshot '" + path + "'");
  out << provenance_header(prov);
  out << "snapshot 1\n";
  out << "t " << format_g17(s.t) << '\n';
  out << "d_plane " << disc.domain.d_plane << " M " << disc.M << " n_colloc "
      << disc.n_colloc << " h " << format_g17(disc.domain.h) << '\n';
  write_mesh_line(out, "fluid_velocity", disc.fluid_velocity);
  write_mesh_line(out, "fluid_pressure", disc.fluid_pressure);
  write_mesh_line(out, "plate", disc.plate);
  write_mesh_line(out, "biot", disc.biot);

  Eigen::VectorXcd modes(disc.n_modes()), phys;
  for (const FieldSlot& f : field_slots(s)) {
    const Eigen::MatrixXcd& c = *f.coeffs;
    out << "field " << f.name << ' ' << c.rows() << ' ' << tr.n_points() << '\n';
    for (Eigen::Index r = 0; r < c.rows(); ++r) {
      modes = c.row(r).transpose();
      tr.to_physical(modes, phys);
      for (int i = 0; i < tr.n_points(); ++i) {
        if (i) out << ' ';
        out << format_g17(phys[i].real());
      }
      out << '\n';
    }
  }
  out.flush();
  if (!out) throw std::runtime_error("write failure on snapshot '" + path + "'");
}

State read_snapshot(const std::string& path, const Discretization& disc,
                    const PlaneTransform& tr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read snapshot '" + path + "'");
  while (in.peek() == '#') {
    std::string comment;
    std::getline(in, comment);
  }

  TokenReader r{in, path};
  r.expect("snapshot");
  check_header_int(path, "format version", r.integer(), 1);
  r.expect("t");
  const double t = r.real();
  r.expect("d_plane");
  check_header_int(path, "d_plane", r.integer(), disc.domain.d_plane);
  r.expect("M");
  check_header_int(path, "M", r.integer(), disc.M);
  r.expect("n_colloc");
  check_header_int(path, "n_colloc", r.integer(), disc.n_colloc);
  r.expect("h");
  if (r.real() != disc.domain.h) corrupt(path, "plate thickness h mismatch");
  read_mesh_line(r, path, "fluid_velocity", disc.fluid_velocity);
  read_mesh_line(r, path, "fluid_pressure", disc.fluid_pressure);
  read_mesh_line(r, path, "plate", disc.plate);
  read_mesh_line(r, path, "biot", disc.biot);

  State s = make_state(disc);
  s.t = t;
  Eigen::VectorXcd phys(tr.n_points()), modes;
  for (const FieldSlot& f : field_slots(s)) {
    Eigen::MatrixXcd& c = *f.mutable_coeffs;
    r.expect("field");
    r.expect(f.name);
    check_header_int(path, (std::string(f.name) + " rows").c_str(), r.integer(),
                     static_cast<int>(c.rows()));
    check_header_int(path, (std::string(f.name) + " points").c_str(), r.integer(),
                     tr.n_points());
    for (Eigen::Index row = 0; row < c.rows(); ++row) {
      for (int i = 0; i < tr.n_points(); ++i) phys[i] = Complex(r.real(), 0.0);
      tr.to_modes(phys, modes);
      c.row(row) = modes.transpose();
    }
  }
  hermitianize(s, disc);
  return s;
}

// ===========================================================================
// CSV
// ===========================================================================

CsvFile::CsvFile(const std::string& path, const Provenance& prov,
                 const std::vector<std::string>& columns)
    : out_(path, std::ios::binary), path_(path), n_cols_(columns.size()) {
  if (!out_) throw ConfigError("cannot write CSV '" + path + "'");
  out_ << provenance_header(prov);
  for (size_t i = 0; i < columns.size(); ++i) {
    if (i) out_ << ',';
    out_ << columns[i];
  }
  out_ << '\n';
}

void CsvFile::row(const std::vector<double>& values) {
  if (values.size() != n_cols_)
    throw std::runtime_error("CSV '" + path_ + "': row width " +
                             std::to_string(values.size()) + " != " +
                             std::to_string(n_cols_) + " columns");
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out_ << ',';
    out_ << format_g17(values[i]);
  }
  out_ << '\n';
}

void CsvFile::close() {
  out_.flush();
  if (!out_) throw std::runtime_error("write failure on CSV '" + path_ + "'");
  out_.close();
}

} // namespace fpsi
