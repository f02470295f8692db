// Grid data model: buses, branches and generators of an AC network in per-unit.
#ifndef OPFLAB_NETWORK_HPP
#define OPFLAB_NETWORK_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace opflab {

using BusId = std::int64_t;

struct Bus {
  BusId id = 0;
  double v_min = 0.0;
  double v_max = 0.0;
  double base_kv = 0.0;
  bool is_slack = false;
  double p_load = 0.0;
  double q_load = 0.0;

  bool operator==(const Bus&) const = default;
};

/// Cost is c2 * p^2 + c1 * p + c0 with p in per-unit and the result in $/h.
struct Generator {
  BusId bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  double cost_c2 = 0.0;
  double cost_c1 = 0.0;
  double cost_c0 = 0.0;

  bool operator==(const Generator&) const = default;
};

/// Series admittance g + jb only; line charging and taps are not modelled.
struct Branch {
  BusId from_bus = 0;
  BusId to_bus = 0;
  double g = 0.0;
  double b = 0.0;
  double s_max = 0.0;

  bool operator==(const Branch&) const = default;
};

enum class Orientation { from, to };

struct Incidence {
  std::size_t branch = 0;
  Orientation orientation = Orientation::from;

  bool operator==(const Incidence&) const = default;
};

/// Immutable network description. Vector index i of every per-bus quantity
/// refers to buses()[i]. Per-bus bound and cost tables are precomputed; buses
/// without a generator get zero generation bounds and zero cost.
class NetworkCase {
 public:
  NetworkCase(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
              std::vector<Generator> generators);

  double base_mva() const { return base_mva_; }
  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const std::vector<Generator>& generators() const { return generators_; }

  Eigen::Index bus_count() const { return static_cast<Eigen::Index>(buses_.size()); }
  Eigen::Index branch_count() const { return static_cast<Eigen::Index>(branches_.size()); }

  std::optional<Eigen::Index> bus_index(BusId id) const;
  /// Bus index of the branch endpoints, -1 when the referenced bus is absent.
  Eigen::Index from_index(std::size_t branch) const { return from_index_[branch]; }
  Eigen::Index to_index(std::size_t branch) const { return to_index_[branch]; }
  /// -1 when no bus is flagged as slack.
  Eigen::Index slack_index() const { return slack_index_; }
  /// Generator index at each bus, -1 where there is none.
  Eigen::Index generator_at(Eigen::Index bus) const { return gen_at_bus_[static_cast<std::size_t>(bus)]; }

  const Eigen::VectorXd& v_min() const { return v_min_; }
  const Eigen::VectorXd& v_max() const { return v_max_; }
  const Eigen::VectorXd& p_min() const { return p_min_; }
  const Eigen::VectorXd& p_max() const { return p_max_; }
  const Eigen::VectorXd& q_min() const { return q_min_; }
  const Eigen::VectorXd& q_max() const { return q_max_; }
  const Eigen::VectorXd& cost_c2() const { return c2_; }
  const Eigen::VectorXd& cost_c1() const { return c1_; }
  const Eigen::VectorXd& cost_c0() const { return c0_; }
  const Eigen::VectorXd& p_load() const { return p_load_; }
  const Eigen::VectorXd& q_load() const { return q_load_; }

  bool operator==(const NetworkCase& other) const;

 private:
  double base_mva_;
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::vector<Generator> generators_;

  std::vector<Eigen::Index> from_index_;
  std::vector<Eigen::Index> to_index_;
  std::vector<Eigen::Index> gen_at_bus_;
  Eigen::Index slack_index_ = -1;
  Eigen::VectorXd v_min_, v_max_, p_min_, p_max_, q_min_, q_max_;
  Eigen::VectorXd c2_, c1_, c0_, p_load_, q_load_;
};

struct ValidationReport {
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

/// Reads the MATPOWER subset (baseMVA, bus, gen, branch, gencost) and converts
/// to per-unit. Throws ParseError, StructuralError or UnsupportedFeature.
NetworkCase parse_matpower_case(std::string_view text);

/// Reads the native sectioned format produced by write_native_case.
NetworkCase parse_native_case(std::string_view text);

/// Dispatches on content: native files start with the "opflab-case" header.
NetworkCase parse_case(std::string_view text);
NetworkCase load_case(const std::filesystem::path& path);

/// Lossless text form (17 significant digits for every real).
std::string write_native_case(const NetworkCase& network);

ValidationReport validate_case(const NetworkCase& network);

/// Every branch touching `bus`, with the end of the branch the bus sits on.
/// Throws PreconditionError for an unknown id.
std::vector<Incidence> incident_branches(const NetworkCase& network, BusId bus);

/// 64-bit FNV-1a of the native serialization, as 16 hex digits.
std::string case_digest(const NetworkCase& network);

/// FNV-1a of arbitrary bytes, same encoding as case_digest.
std::string digest_bytes(std::string_view bytes);

}  // namespace opflab

#endif  // OPFLAB_NETWORK_HPP
