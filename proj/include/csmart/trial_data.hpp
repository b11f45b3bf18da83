#pragma once

#include <Eigen/Core>
#include <array>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace csmart {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct SingularityError : Error {
  using Error::Error;
};
struct ConvergenceError : Error {
  using Error::Error;
};
struct DegenerateWeightsError : Error {
  using Error::Error;
};
struct FeasibilityError : Error {
  using Error::Error;
};

/// One of the four embedded clustered adaptive interventions (a1, a2),
/// a2 being the second-stage option for non-responders.
struct EmbeddedAI {
  int a1;  // -1 or +1
  int a2;  // -1 or +1

  bool operator==(const EmbeddedAI&) const = default;
};

/// Fixed enumeration order: (1,1), (1,-1), (-1,1), (-1,-1).
inline constexpr std::array<EmbeddedAI, 4> kRegimens = {
    {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};

inline int regimen_index(EmbeddedAI ai) {
  return (ai.a1 == 1 ? 0 : 2) + (ai.a2 == 1 ? 0 : 1);
}

/// Observed data for one cluster: baseline covariates, first-stage arm,
/// response status, second-stage arm (non-responders only) and the vector
/// of member-level outcomes.
struct ClusterRecord {
  std::string cluster_id;
  Eigen::VectorXd x;        // length p, cluster-level covariates
  int a1 = 1;               // -1 or +1
  int r = 0;                // 0 or 1
  std::optional<int> a2;    // present iff r == 0
  Eigen::VectorXd y;        // length m_i >= 1

  Eigen::Index size() const { return y.size(); }
};

/// Immutable after construction; safe to share across readers.
struct TrialDataset {
  std::vector<ClusterRecord> clusters;
  int p = 0;
  std::vector<std::string> covariate_names;

  int n() const { return static_cast<int>(clusters.size()); }
  long total_members() const;
};

/// 1 iff the record's observed pathway is consistent with regimen `ai`.
/// Responders to a1 are consistent with both (a1, 1) and (a1, -1).
int consistency_indicator(const ClusterRecord& record, EmbeddedAI ai);

/// Deterministic pathway index in 1..6:
/// (1,1,.)=1, (1,0,1)=2, (1,0,-1)=3, (-1,1,.)=4, (-1,0,1)=5, (-1,0,-1)=6.
int pathway_of(const ClusterRecord& record);

/// Pathways consistent with a regimen (two per regimen).
std::array<int, 2> regimen_pathways(EmbeddedAI ai);

struct ValidationReport {
  bool ok = true;
  std::array<int, 6> pathway_counts{};   // index 0 = pathway 1
  std::array<int, 4> regimen_counts{};   // kRegimens order
  std::vector<std::string> issues;

  std::string str() const;
};

/// Structural checks: per-pathway and per-regimen counts, empty regimen
/// cells, m_i = 0, non-finite values, a2-presence violations.
ValidationReport validate_design(const TrialDataset& ds);

/// CSV, one row per cluster member:
///   cluster_id, member_id, a1, r, a2, y, x1..xp
/// a1, a2 in {-1, 1}; a2 is the literal "NA" when r = 1; header required.
TrialDataset load_csv(const std::string& path);
void write_csv(const TrialDataset& ds, const std::string& path);

TrialDataset parse_csv(std::istream& in);
void write_csv(const TrialDataset& ds, std::ostream& out);

}  // namespace csmart
