/** @file io.hpp
 *  @brief Emitted-file plumbing: provenance headers, restartable snapshot
 *         files, and bit-faithful CSV writers.
 *
 *  Every emitted file starts with two comment lines identifying the build,
 *  the configuration fingerprint, and the run mode. Floating-point values are
 *  rendered with %.17g (exact double round-trip, C locale), so identical runs
 *  emit byte-identical files.
 */
#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fpsi/geometry.hpp"
#include "fpsi/state.hpp"
#include "fpsi/transform.hpp"

namespace fpsi {

/// Build identifier stamped into emitted files.
std::string build_version();

/// Stamp shared by all files one invocation emits.
struct Provenance {
  std::uint64_t config_hash = 0;
  std::string run_mode; ///< run-mode name ("-" when not applicable)
  std::string note;     ///< optional extras (e.g. CLI overrides)
};

/// "# fpsi <version>\n# config=<16-hex hash> mode=<mode>[ <note>]\n".
std::string provenance_header(const Provenance& p);

/// %.17g rendering used for every floating-point value in emitted files.
std::string format_g17(double v);

// ===========================================================================
// Snapshots
// ===========================================================================

/** Write one state as text: provenance, a header (time, mode set, meshes),
 *  then, per field, real values on the in-plane collocation grid -- one row
 *  per (component, transverse node) pair in storage order, one column per
 *  grid point. Grid values of bandlimited fields are an exact alternative
 *  representation of the mode coefficients, so snapshots restart runs.
 */
void write_snapshot(const std::string& path, const State& s, const Discretization& disc,
                    const PlaneTransform& tr, const Provenance& prov);

/** Read a snapshot back into a state. The header must describe exactly the
 *  given discretization (ConfigError otherwise). The analysis transform
 *  restores mode coefficients up to FFT roundoff and Hermitian pairing is
 *  re-enforced; constraint ties and rates are taken as stored, so admissibility
 *  of the result is the writer's (or strict mode's) responsibility.
 */
State read_snapshot(const std::string& path, const Discretization& disc,
                    const PlaneTransform& tr);

// ===========================================================================
// CSV
// ===========================================================================

/// Provenance-stamped CSV: "#" comment lines, one column-name row, then
/// %.17g data rows.
class CsvFile {
public:
  CsvFile(const std::string& path, const Provenance& prov,
          const std::vector<std::string>& columns);

  void row(const std::vector<double>& values); ///< size must match columns

  /// Flush and verify the stream; throws std::runtime_error on write failure.
  void close();

private:
  std::ofstream out_;
  std::string path_;
  size_t n_cols_ = 0;
};

} // namespace fpsi
