/** @file config.hpp
 *  @brief Sectioned key=value run configuration: parsing, cross-field
 *         validation, and the assembled settings a simulation run consumes.
 *
 *  The accepted format is a flat text file of `[section]` headers and
 *  `key = value` lines; `#` starts a comment anywhere on a line. Sections,
 *  their keys, and the value grammar are documented in the README. Unknown
 *  sections or keys, duplicate keys, malformed values, and inconsistent
 *  combinations are all rejected with a ConfigError naming the offender.
 */
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "fpsi/geometry.hpp"
#include "fpsi/physics.hpp"
#include "fpsi/linsolve.hpp"
#include "fpsi/stepper.hpp"

namespace fpsi {

// ===========================================================================
// Choice enums
// ===========================================================================

/// How the state at t = 0 is produced.
enum class InitialKind {
  Zero,         ///< all fields zero
  Expressions,  ///< closed-form fields, interpolated and projected
  Snapshot,     ///< restart from a snapshot file
  Random,       ///< seeded random admissible state
  Manufactured  ///< exact state of a manufactured-solution case
};

/// How the right-hand sides are produced.
enum class SourceKind {
  Zero,         ///< homogeneous problem
  Expressions,  ///< closed-form body forces / mass source
  Manufactured  ///< full source set of a manufactured-solution case
};

/// The two built-in manufactured-solution cases: one tailored to time
/// refinement (fields the transverse spaces represent exactly), one to
/// transverse refinement (profiles outside the element spaces).
enum class MmsCaseId { Temporal, Spatial };

const char* mms_case_name(MmsCaseId id);

// ===========================================================================
// Assembled configuration
// ===========================================================================

/** Everything a run needs, as parsed from one config file. Members mirror the
 *  file sections; `config_hash` fingerprints the raw file bytes (FNV-1a) for
 *  the provenance headers of emitted files.
 */
struct RunConfig {
  // [domain]
  DomainSpec domain;

  // [discretization]
  int M = 4;
  int fluid_elems = 8, plate_elems = 8, biot_elems = 8;

  // [params]
  PhysicalParams params;

  // [permeability]
  PermeabilityModel perm;

  // [sources]
  SourceKind source_kind = SourceKind::Zero;
  Sources sources;                           ///< Expressions kind
  MmsCaseId source_case = MmsCaseId::Temporal;

  // [initial]
  InitialKind initial_kind = InitialKind::Zero;
  InitialData initial;                       ///< Expressions kind
  std::string snapshot_path;                 ///< Snapshot kind
  std::uint64_t seed = 1;                    ///< Random kind
  double amplitude = 1.0, decay = 0.5;       ///< Random kind
  MmsCaseId initial_case = MmsCaseId::Temporal;

  // [run]
  double T = 1.0;
  int N = 50;
  IterativeOptions solver;
  bool strict = false;
  double strict_tol = 1e-9;

  // [output]
  std::string out_dir = "out";
  int cadence = 0; ///< snapshot every `cadence` steps; 0 = max(1, N/50)

  std::uint64_t config_hash = 0;
};

/// Parse + validate configuration text (the file contents).
RunConfig parse_config_text(const std::string& text);

/// Read the file and parse it; ConfigError on unreadable paths.
RunConfig parse_config_file(const std::string& path);

/// Effective snapshot cadence: the configured value, or max(1, N/50).
int snapshot_cadence(const RunConfig& cfg);

/// Build the discretization the configuration describes.
Discretization make_discretization(const RunConfig& cfg);

/// FNV-1a 64-bit hash (provenance fingerprint of config bytes).
std::uint64_t fnv1a64(std::string_view bytes);

} // namespace fpsi
