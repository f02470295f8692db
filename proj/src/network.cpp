#include "opflab/network.hpp"

#include "opflab/error.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

namespace opflab {

namespace {

constexpr std::string_view kNativeMagic = "opflab-case";
constexpr int kNativeVersion = 1;

}  // namespace

NetworkCase::NetworkCase(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
                         std::vector<Generator> generators)
    : base_mva_(base_mva),
      buses_(std::move(buses)),
      branches_(std::move(branches)),
      generators_(std::move(generators)) {
  const Eigen::Index n = bus_count();
  v_min_.resize(n);
  v_max_.resize(n);
  p_load_.resize(n);
  q_load_.resize(n);
  p_min_ = Eigen::VectorXd::Zero(n);
  p_max_ = Eigen::VectorXd::Zero(n);
  q_min_ = Eigen::VectorXd::Zero(n);
  q_max_ = Eigen::VectorXd::Zero(n);
  c2_ = Eigen::VectorXd::Zero(n);
  c1_ = Eigen::VectorXd::Zero(n);
  c0_ = Eigen::VectorXd::Zero(n);
  gen_at_bus_.assign(buses_.size(), -1);

  for (Eigen::Index i = 0; i < n; ++i) {
    const Bus& bus = buses_[static_cast<std::size_t>(i)];
    v_min_[i] = bus.v_min;
    v_max_[i] = bus.v_max;
    p_load_[i] = bus.p_load;
    q_load_[i] = bus.q_load;
    if (bus.is_slack && slack_index_ < 0) slack_index_ = i;
  }
  for (std::size_t k = 0; k < generators_.size(); ++k) {
    const Generator& gen = generators_[k];
    const auto at = bus_index(gen.bus);
    if (!at || gen_at_bus_[static_cast<std::size_t>(*at)] >= 0) continue;
    const Eigen::Index i = *at;
    gen_at_bus_[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(k);
    p_min_[i] = gen.p_min;
    p_max_[i] = gen.p_max;
    q_min_[i] = gen.q_min;
    q_max_[i] = gen.q_max;
    c2_[i] = gen.cost_c2;
    c1_[i] = gen.cost_c1;
    c0_[i] = gen.cost_c0;
  }
  from_index_.reserve(branches_.size());
  to_index_.reserve(branches_.size());
  for (const Branch& br : branches_) {
    from_index_.push_back(bus_index(br.from_bus).value_or(-1));
    to_index_.push_back(bus_index(br.to_bus).value_or(-1));
  }
}

std::optional<Eigen::Index> NetworkCase::bus_index(BusId id) const {
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    if (buses_[i].id == id) return static_cast<Eigen::Index>(i);
  }
  return std::nullopt;
}

bool NetworkCase::operator==(const NetworkCase& other) const {
  return base_mva_ == other.base_mva_ && buses_ == other.buses_ && branches_ == other.branches_ &&
         generators_ == other.generators_;
}

// ---------------------------------------------------------------------------
// MATPOWER subset

namespace {

struct Row {
  std::size_t line = 0;
  std::vector<double> values;
};

struct MatpowerTables {
  std::optional<double> base_mva;
  std::size_t base_mva_line = 0;
  std::map<std::string, std::vector<Row>, std::less<>> tables;
  std::set<std::string, std::less<>> seen;
};

bool is_table_name(std::string_view name) {
  return name == "bus" || name == "gen" || name == "branch" || name == "gencost";
}

void append_rows(std::string_view content, std::size_t line, std::string_view table,
                 std::vector<Row>& rows) {
  for (auto piece : detail::split(content, ";")) {
    const auto tokens = detail::split(piece, " \t\r,");
    if (tokens.empty()) continue;
    Row row{line, {}};
    for (auto token : tokens) {
      if (token == "...") continue;
      const auto value = detail::parse_real(token);
      if (!value) {
        throw ParseError(line, "non-numeric value '" + std::string(token) + "' in mpc." +
                                   std::string(table));
      }
      row.values.push_back(*value);
    }
    rows.push_back(std::move(row));
  }
}

MatpowerTables scan_matpower(std::string_view text) {
  MatpowerTables out;
  const auto lines = detail::split_lines(text);
  std::string open_table;
  std::size_t open_line = 0;

  for (std::size_t k = 0; k < lines.size(); ++k) {
    const std::size_t line_no = k + 1;
    std::string_view line = lines[k];
    if (const auto pct = line.find('%'); pct != std::string_view::npos) line = line.substr(0, pct);

    if (!open_table.empty()) {
      const auto close = line.find(']');
      append_rows(line.substr(0, close), line_no, open_table, out.tables[open_table]);
      if (close != std::string_view::npos) open_table.clear();
      continue;
    }

    const auto mpc = line.find("mpc.");
    if (mpc == std::string_view::npos) continue;
    const auto eq = line.find('=', mpc);
    if (eq == std::string_view::npos) continue;
    const auto name = detail::trim(line.substr(mpc + 4, eq - mpc - 4));
    const auto rhs = line.substr(eq + 1);

    if (name == "baseMVA") {
      const auto value = detail::parse_real(detail::trim(rhs.substr(0, rhs.find(';'))));
      if (!value) throw ParseError(line_no, "mpc.baseMVA is not a number");
      out.base_mva = *value;
      out.base_mva_line = line_no;
    } else if (is_table_name(name)) {
      const auto open = rhs.find('[');
      if (open == std::string_view::npos) {
        throw ParseError(line_no, "expected '[' after mpc." + std::string(name));
      }
      const std::string table(name);
      out.seen.insert(table);
      auto& rows = out.tables[table];
      const auto body = rhs.substr(open + 1);
      const auto close = body.find(']');
      append_rows(body.substr(0, close), line_no, table, rows);
      if (close == std::string_view::npos) {
        open_table = table;
        open_line = line_no;
      }
    }
  }
  if (!open_table.empty()) {
    throw ParseError(open_line, "mpc." + open_table + " is never closed with ']'");
  }
  return out;
}

const std::vector<Row>& require_table(const MatpowerTables& tables, std::string_view name) {
  if (!tables.seen.contains(name)) {
    throw StructuralError("missing required table mpc." + std::string(name));
  }
  const auto& rows = tables.tables.find(name)->second;
  if (rows.empty()) throw StructuralError("table mpc." + std::string(name) + " is empty");
  return rows;
}

void require_columns(const Row& row, std::size_t count, std::string_view table) {
  if (row.values.size() < count) {
    throw ParseError(row.line, "mpc." + std::string(table) + " row has " +
                                   std::to_string(row.values.size()) + " columns, expected at least " +
                                   std::to_string(count));
  }
}

BusId to_bus_id(double value, std::size_t line) {
  if (value != std::floor(value) || !std::isfinite(value)) {
    throw ParseError(line, "bus id is not an integer");
  }
  return static_cast<BusId>(value);
}

}  // namespace

NetworkCase parse_matpower_case(std::string_view text) {
  const MatpowerTables tables = scan_matpower(text);
  if (!tables.base_mva) throw StructuralError("missing mpc.baseMVA");
  const double base = *tables.base_mva;
  if (!(base > 0.0)) throw ParseError(tables.base_mva_line, "mpc.baseMVA must be positive");

  // Columns (1-based, MATPOWER): bus 1 id, 2 type, 3 Pd, 4 Qd, 10 baseKV, 12 Vmax, 13 Vmin.
  std::vector<Bus> buses;
  for (const Row& row : require_table(tables, "bus")) {
    require_columns(row, 13, "bus");
    const auto& c = row.values;
    Bus bus;
    bus.id = to_bus_id(c[0], row.line);
    bus.is_slack = c[1] == 3.0;
    bus.p_load = c[2] / base;
    bus.q_load = c[3] / base;
    bus.base_kv = c[9];
    bus.v_max = c[11];
    bus.v_min = c[12];
    buses.push_back(bus);
  }

  // gen: 1 bus, 4 Qmax, 5 Qmin, 8 status, 9 Pmax, 10 Pmin.
  const auto& gen_rows = require_table(tables, "gen");
  const auto& cost_rows = require_table(tables, "gencost");
  if (cost_rows.size() < gen_rows.size()) {
    throw StructuralError("mpc.gencost has fewer rows than mpc.gen");
  }
  std::vector<Generator> generators;
  std::set<BusId> gen_buses;
  for (std::size_t k = 0; k < gen_rows.size(); ++k) {
    const Row& row = gen_rows[k];
    require_columns(row, 10, "gen");
    const auto& c = row.values;
    if (c[7] <= 0.0) continue;
    Generator gen;
    gen.bus = to_bus_id(c[0], row.line);
    if (!gen_buses.insert(gen.bus).second) {
      throw UnsupportedFeature("line " + std::to_string(row.line) +
                               ": more than one in-service generator at bus " +
                               std::to_string(gen.bus));
    }
    gen.q_max = c[3] / base;
    gen.q_min = c[4] / base;
    gen.p_max = c[8] / base;
    gen.p_min = c[9] / base;

    // gencost: 1 model, 4 n, then n coefficients, highest order first.
    const Row& cost = cost_rows[k];
    require_columns(cost, 4, "gencost");
    if (cost.values[0] != 2.0) {
      throw UnsupportedFeature("line " + std::to_string(cost.line) +
                               ": only polynomial gencost (model 2) is supported");
    }
    const double n_real = cost.values[3];
    if (n_real < 0.0 || n_real != std::floor(n_real)) {
      throw ParseError(cost.line, "gencost coefficient count must be a non-negative integer");
    }
    const auto n = static_cast<std::size_t>(n_real);
    require_columns(cost, 4 + n, "gencost");
    std::vector<double> coeffs(cost.values.begin() + 4, cost.values.begin() + 4 + static_cast<long>(n));
    while (coeffs.size() > 3) {
      if (coeffs.front() != 0.0) {
        throw UnsupportedFeature("line " + std::to_string(cost.line) +
                                 ": gencost polynomial above degree 2 is not supported");
      }
      coeffs.erase(coeffs.begin());
    }
    coeffs.insert(coeffs.begin(), 3 - coeffs.size(), 0.0);
    gen.cost_c2 = coeffs[0] * base * base;
    gen.cost_c1 = coeffs[1] * base;
    gen.cost_c0 = coeffs[2];
    generators.push_back(gen);
  }

  // branch: 1 from, 2 to, 3 r, 4 x, 6 rateA (0 = unlimited), 11 status.
  std::vector<Branch> branches;
  for (const Row& row : require_table(tables, "branch")) {
    require_columns(row, 6, "branch");
    const auto& c = row.values;
    if (c.size() >= 11 && c[10] <= 0.0) continue;
    const std::complex<double> z(c[2], c[3]);
    if (std::abs(z) == 0.0) throw ParseError(row.line, "branch has zero series impedance");
    const std::complex<double> y = 1.0 / z;
    Branch br;
    br.from_bus = to_bus_id(c[0], row.line);
    br.to_bus = to_bus_id(c[1], row.line);
    br.g = y.real();
    br.b = y.imag();
    br.s_max = c[5] > 0.0 ? c[5] / base : std::numeric_limits<double>::infinity();
    branches.push_back(br);
  }

  return NetworkCase(base, std::move(buses), std::move(branches), std::move(generators));
}

// ---------------------------------------------------------------------------
// Native format
//
//   opflab-case 1
//   base_mva <real>
//   [bus] id slack v_min v_max base_kv p_load q_load
//   <one row per bus>
//   [generator] bus p_min p_max q_min q_max cost_c2 cost_c1 cost_c0
//   <one row per generator>
//   [branch] from to g b s_max
//   <one row per branch>
//   [end]
//
// All quantities per-unit on base_mva; blank lines and '#' comments allowed.

namespace {

constexpr std::string_view kBusHeader = "[bus] id slack v_min v_max base_kv p_load q_load";
constexpr std::string_view kGenHeader =
    "[generator] bus p_min p_max q_min q_max cost_c2 cost_c1 cost_c0";
constexpr std::string_view kBranchHeader = "[branch] from to g b s_max";

}  // namespace

std::string write_native_case(const NetworkCase& network) {
  using detail::format_real;
  std::ostringstream out;
  out << kNativeMagic << ' ' << kNativeVersion << '\n';
  out << "base_mva " << format_real(network.base_mva()) << '\n';
  out << kBusHeader << '\n';
  for (const Bus& b : network.buses()) {
    out << b.id << ' ' << (b.is_slack ? 1 : 0) << ' ' << format_real(b.v_min) << ' '
        << format_real(b.v_max) << ' ' << format_real(b.base_kv) << ' ' << format_real(b.p_load)
        << ' ' << format_real(b.q_load) << '\n';
  }
  out << kGenHeader << '\n';
  for (const Generator& g : network.generators()) {
    out << g.bus << ' ' << format_real(g.p_min) << ' ' << format_real(g.p_max) << ' '
        << format_real(g.q_min) << ' ' << format_real(g.q_max) << ' ' << format_real(g.cost_c2)
        << ' ' << format_real(g.cost_c1) << ' ' << format_real(g.cost_c0) << '\n';
  }
  out << kBranchHeader << '\n';
  for (const Branch& br : network.branches()) {
    out << br.from_bus << ' ' << br.to_bus << ' ' << format_real(br.g) << ' ' << format_real(br.b)
        << ' ' << format_real(br.s_max) << '\n';
  }
  out << "[end]\n";
  return out.str();
}

NetworkCase parse_native_case(std::string_view text) {
  const auto lines = detail::split_lines(text);
  enum class Section { header, bus, generator, branch, done };
  Section section = Section::header;
  bool have_magic = false;
  std::optional<double> base;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Branch> branches;

  auto reals = [](const std::vector<std::string_view>& tokens, std::size_t expected,
                  std::size_t line) {
    if (tokens.size() != expected) {
      throw ParseError(line, "expected " + std::to_string(expected) + " fields, found " +
                                 std::to_string(tokens.size()));
    }
    std::vector<double> values;
    for (auto t : tokens) {
      const auto v = detail::parse_real(t);
      if (!v) throw ParseError(line, "non-numeric field '" + std::string(t) + "'");
      values.push_back(*v);
    }
    return values;
  };

  for (std::size_t k = 0; k < lines.size(); ++k) {
    const std::size_t line_no = k + 1;
    auto line = detail::trim(lines[k]);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = detail::trim(line.substr(0, hash));
    }
    if (line.empty()) continue;
    const auto tokens = detail::split(line, " \t");

    if (!have_magic) {
      if (tokens.size() != 2 || tokens[0] != kNativeMagic) {
        throw ParseError(line_no, "missing '" + std::string(kNativeMagic) + "' header");
      }
      if (tokens[1] != std::to_string(kNativeVersion)) {
        throw UnsupportedFeature("native case version " + std::string(tokens[1]) +
                                 " is not supported");
      }
      have_magic = true;
      continue;
    }
    if (line.front() == '[') {
      if (line == kBusHeader) {
        section = Section::bus;
      } else if (line == kGenHeader) {
        section = Section::generator;
      } else if (line == kBranchHeader) {
        section = Section::branch;
      } else if (line == "[end]") {
        section = Section::done;
      } else {
        throw ParseError(line_no, "unknown section header '" + std::string(line) + "'");
      }
      continue;
    }
    switch (section) {
      case Section::header: {
        if (tokens.size() == 2 && tokens[0] == "base_mva") {
          base = reals({tokens[1]}, 1, line_no)[0];
        } else {
          throw ParseError(line_no, "unexpected line before [bus] section");
        }
        break;
      }
      case Section::bus: {
        const auto v = reals(tokens, 7, line_no);
        buses.push_back(Bus{to_bus_id(v[0], line_no), v[2], v[3], v[4], v[1] != 0.0, v[5], v[6]});
        break;
      }
      case Section::generator: {
        const auto v = reals(tokens, 8, line_no);
        generators.push_back(
            Generator{to_bus_id(v[0], line_no), v[1], v[2], v[3], v[4], v[5], v[6], v[7]});
        break;
      }
      case Section::branch: {
        const auto v = reals(tokens, 5, line_no);
        branches.push_back(
            Branch{to_bus_id(v[0], line_no), to_bus_id(v[1], line_no), v[2], v[3], v[4]});
        break;
      }
      case Section::done:
        throw ParseError(line_no, "content after [end]");
    }
  }
  if (!have_magic) throw StructuralError("empty native case");
  if (!base) throw StructuralError("missing base_mva");
  if (section != Section::done) throw StructuralError("native case is truncated (no [end])");
  if (buses.empty()) throw StructuralError("native case has no buses");
  return NetworkCase(*base, std::move(buses), std::move(branches), std::move(generators));
}

NetworkCase parse_case(std::string_view text) {
  const auto lines = detail::split_lines(text);
  for (auto line : lines) {
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (t.starts_with(kNativeMagic)) return parse_native_case(text);
    break;
  }
  return parse_matpower_case(text);
}

NetworkCase load_case(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot open case file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_case(buffer.str());
}

// ---------------------------------------------------------------------------

ValidationReport validate_case(const NetworkCase& network) {
  ValidationReport report;
  auto fail = [&](std::string msg) { report.failures.push_back(std::move(msg)); };

  const auto& buses = network.buses();
  if (buses.empty()) fail("case has no buses");

  std::set<BusId> ids;
  std::size_t slack_count = 0;
  for (const Bus& b : buses) {
    const std::string name = "bus " + std::to_string(b.id);
    if (!ids.insert(b.id).second) fail(name + ": duplicate bus id");
    if (!(b.v_min > 0.0)) fail(name + ": v_min must be positive");
    if (!(b.v_min <= b.v_max)) {
      fail(name + ": v_min " + detail::format_real(b.v_min) + " exceeds v_max " +
           detail::format_real(b.v_max));
    }
    if (b.is_slack) ++slack_count;
  }
  if (!buses.empty() && slack_count != 1) {
    fail("case must have exactly one slack bus, found " + std::to_string(slack_count));
  }

  if (network.generators().empty()) fail("case has no generators");
  std::set<BusId> gen_buses;
  for (std::size_t k = 0; k < network.generators().size(); ++k) {
    const Generator& g = network.generators()[k];
    const std::string name = "generator " + std::to_string(k) + " (bus " + std::to_string(g.bus) + ")";
    if (!ids.contains(g.bus)) fail(name + ": bus does not exist");
    if (!gen_buses.insert(g.bus).second) fail(name + ": more than one generator at this bus");
    if (!(g.p_min <= g.p_max)) fail(name + ": p_min exceeds p_max");
    if (!(g.q_min <= g.q_max)) fail(name + ": q_min exceeds q_max");
    if (!(g.cost_c2 >= 0.0)) fail(name + ": negative quadratic cost coefficient");
  }

  bool endpoints_ok = true;
  for (std::size_t k = 0; k < network.branches().size(); ++k) {
    const Branch& br = network.branches()[k];
    const std::string name = "branch " + std::to_string(k) + " (" + std::to_string(br.from_bus) +
                             "->" + std::to_string(br.to_bus) + ")";
    if (br.from_bus == br.to_bus) fail(name + ": from_bus equals to_bus");
    if (!(br.s_max > 0.0)) fail(name + ": s_max must be positive");
    if (!ids.contains(br.from_bus)) {
      fail(name + ": from_bus " + std::to_string(br.from_bus) + " does not exist");
      endpoints_ok = false;
    }
    if (!ids.contains(br.to_bus)) {
      fail(name + ": to_bus " + std::to_string(br.to_bus) + " does not exist");
      endpoints_ok = false;
    }
  }

  if (!buses.empty() && endpoints_ok) {
    const auto n = static_cast<std::size_t>(network.bus_count());
    std::vector<std::vector<std::size_t>> adjacency(n);
    for (std::size_t k = 0; k < network.branches().size(); ++k) {
      const auto f = static_cast<std::size_t>(network.from_index(k));
      const auto t = static_cast<std::size_t>(network.to_index(k));
      adjacency[f].push_back(t);
      adjacency[t].push_back(f);
    }
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = true;
    std::size_t reached = 1;
    while (!frontier.empty()) {
      const auto u = frontier.front();
      frontier.pop();
      for (auto v : adjacency[u]) {
        if (!seen[v]) {
          seen[v] = true;
          ++reached;
          frontier.push(v);
        }
      }
    }
    if (reached != n) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!seen[i]) {
          fail("bus " + std::to_string(buses[i].id) + ": not connected to bus " +
               std::to_string(buses[0].id));
        }
      }
    }
  }
  return report;
}

std::vector<Incidence> incident_branches(const NetworkCase& network, BusId bus) {
  if (!network.bus_index(bus)) {
    throw PreconditionError("unknown bus id " + std::to_string(bus));
  }
  std::vector<Incidence> out;
  for (std::size_t k = 0; k < network.branches().size(); ++k) {
    const Branch& br = network.branches()[k];
    if (br.from_bus == bus) out.push_back({k, Orientation::from});
    if (br.to_bus == bus) out.push_back({k, Orientation::to});
  }
  return out;
}

std::string digest_bytes(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

std::string case_digest(const NetworkCase& network) { return digest_bytes(write_native_case(network)); }

}  // namespace opflab
