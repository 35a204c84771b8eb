#include "gridsynth/caseio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <variant>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gridsynth/error.hpp"

namespace gridsynth::caseio {

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

std::string quote_opt(const std::optional<std::string>& s) { return s ? quote(*s) : "[]"; }

int kind_code(BusKind k) { return static_cast<int>(k); }
int kind_code(BranchKind k) { return static_cast<int>(k); }
int kind_code(CostKind k) { return static_cast<int>(k); }

const char* kCondenserFuel = "condenser";

// Cell entries are strings or the empty matrix, which stands for "absent".
using Cell = std::optional<std::string>;

struct Statement {
  std::vector<std::vector<double>> matrix;
  std::vector<std::vector<Cell>> cells;
  std::optional<std::string> text;
  bool is_cell = false;
};

// Removes % comments outside quoted strings.
std::string strip_comments(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_quote = false, in_comment = false;
  for (char c : text) {
    if (c == '\n') {
      in_comment = false;
      in_quote = false;
      out += c;
      continue;
    }
    if (in_comment) continue;
    if (c == '\'') in_quote = !in_quote;
    if (c == '%' && !in_quote) {
      in_comment = true;
      continue;
    }
    out += c;
  }
  return out;
}

class Parser {
 public:
  explicit Parser(std::string text) : s_(std::move(text)) {}

  std::map<std::string, Statement> parse() {
    std::map<std::string, Statement> out;
    while (true) {
      auto at = s_.find("mpc.", pos_);
      if (at == std::string::npos) break;
      pos_ = at + 4;
      std::string name;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
        name += s_[pos_++];
      }
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] != '=') fail("expected '=' after mpc." + name);
      ++pos_;
      skip_ws();
      out[name] = statement(name);
    }
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    auto line = 1 + std::count(s_.begin(), s_.begin() + std::min(pos_, s_.size()), '\n');
    throw ValidationError(fmt::format("case file line {}: {}", line, what));
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  std::string quoted() {
    std::string out;
    ++pos_;
    while (true) {
      if (pos_ >= s_.size()) fail("unterminated string");
      char c = s_[pos_++];
      if (c == '\'') {
        if (pos_ < s_.size() && s_[pos_] == '\'') {
          out += '\'';
          ++pos_;
          continue;
        }
        return out;
      }
      out += c;
    }
  }

  double number(const std::string& name) {
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) fail(fmt::format("mpc.{}: expected a number", name));
    pos_ += static_cast<std::size_t>(end - begin);
    return v;
  }

  Statement statement(const std::string& name) {
    Statement st;
    if (s_[pos_] == '\'') {
      st.text = quoted();
    } else if (s_[pos_] == '[') {
      ++pos_;
      std::vector<double> row;
      while (true) {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == ',' || s_[pos_] == '\r')) ++pos_;
        if (pos_ >= s_.size()) fail(fmt::format("mpc.{}: unterminated matrix", name));
        char c = s_[pos_];
        if (c == ']') {
          ++pos_;
          break;
        }
        if (c == ';' || c == '\n') {
          ++pos_;
          if (!row.empty()) st.matrix.push_back(std::move(row));
          row.clear();
          continue;
        }
        row.push_back(number(name));
      }
      if (!row.empty()) st.matrix.push_back(std::move(row));
    } else if (s_[pos_] == '{') {
      st.is_cell = true;
      ++pos_;
      std::vector<Cell> row;
      while (true) {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == ',' || s_[pos_] == '\r')) ++pos_;
        if (pos_ >= s_.size()) fail(fmt::format("mpc.{}: unterminated cell array", name));
        char c = s_[pos_];
        if (c == '}') {
          ++pos_;
          break;
        }
        if (c == ';' || c == '\n') {
          ++pos_;
          if (!row.empty()) st.cells.push_back(std::move(row));
          row.clear();
          continue;
        }
        if (c == '\'') {
          row.emplace_back(quoted());
        } else if (s_.compare(pos_, 2, "[]") == 0) {
          pos_ += 2;
          row.emplace_back(std::nullopt);
        } else {
          fail(fmt::format("mpc.{}: unexpected '{}' in cell array", name, c));
        }
      }
      if (!row.empty()) st.cells.push_back(std::move(row));
    } else {
      st.matrix.push_back({number(name)});
    }
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ';') ++pos_;
    return st;
  }

  std::string s_;
  std::size_t pos_ = 0;
};

const Statement& need(const std::map<std::string, Statement>& st, const std::string& name) {
  auto it = st.find(name);
  if (it == st.end()) throw ValidationError("case file: missing mpc." + name);
  return it->second;
}

const std::vector<std::vector<double>>& table(const std::map<std::string, Statement>& st, const std::string& name,
                                              std::size_t rows, std::size_t min_cols) {
  const auto& t = need(st, name).matrix;
  if (t.size() != rows) {
    throw ValidationError(fmt::format("case file: mpc.{} has {} rows, expected {}", name, t.size(), rows));
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i].size() < min_cols) {
      throw ValidationError(fmt::format("case file: mpc.{} row {} has {} columns, expected {}", name, i + 1,
                                        t[i].size(), min_cols));
    }
  }
  return t;
}

const std::vector<std::vector<Cell>>& cells(const std::map<std::string, Statement>& st, const std::string& name,
                                            std::size_t rows, std::size_t cols) {
  const auto& t = need(st, name).cells;
  if (t.size() != rows) {
    throw ValidationError(fmt::format("case file: mpc.{} has {} rows, expected {}", name, t.size(), rows));
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i].size() != cols) {
      throw ValidationError(fmt::format("case file: mpc.{} row {} has {} entries, expected {}", name, i + 1,
                                        t[i].size(), cols));
    }
  }
  return t;
}

std::string req(const Cell& c, const std::string& what) {
  if (!c) throw ValidationError("case file: missing " + what);
  return *c;
}

int to_index(double v, int n, const std::string& what) {
  int i = static_cast<int>(std::lround(v)) - 1;
  if (i < 0 || i >= n || std::abs(v - std::round(v)) > 0) {
    throw ValidationError(fmt::format("case file: {} refers to bus {} outside 1..{}", what, v, n));
  }
  return i;
}

std::size_t rows_of(const std::map<std::string, Statement>& st, const std::string& name) {
  auto it = st.find(name);
  if (it == st.end()) return 0;
  return it->second.is_cell ? it->second.cells.size() : it->second.matrix.size();
}

int peak_hour(const GridModel& model) {
  auto total = model.system_load_mw();
  if (total.empty()) return -1;
  return static_cast<int>(std::max_element(total.begin(), total.end()) - total.begin());
}

}  // namespace

CaseText export_case(const GridModel& model, const ExportOptions& options) {
  for (const auto& br : model.branches) {
    if (options.require_parameters && br.x == 0.0 && br.r == 0.0) throw ValidationError(fmt::format("branch {} has no impedance", br.id));
  }
  const int nb = model.num_buses();
  int hour = options.load_hour >= 0 ? options.load_hour : peak_hour(model);
  std::vector<double> pd(nb, 0.0);
  if (hour >= 0 && hour < model.hours()) pd = model.bus_load_mw(hour);
  const double qfac = std::tan(std::acos(model.load_power_factor));

  std::vector<int> type(nb, 1);
  double best = -1.0;
  int slack = 0;
  for (const auto& g : model.generators) {
    type[g.bus] = 2;
    if (g.pmax_mw > best) {
      best = g.pmax_mw;
      slack = g.bus;
    }
  }
  for (const auto& c : model.condensers) {
    if (c.active) type[c.bus] = 2;
  }
  if (nb > 0) type[slack] = 3;

  std::string m;
  m += fmt::format("function mpc = {}\n", options.case_name);
  m += "mpc.version = '2';\n";
  m += fmt::format("mpc.baseMVA = {};\n", num(model.base_mva));
  m += fmt::format("mpc.load_power_factor = {};\n\n", num(model.load_power_factor));

  m += "%% bus data\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\nmpc.bus = [\n";
  for (int i = 0; i < nb; ++i) {
    m += fmt::format("\t{}\t{}\t{}\t{}\t0\t0\t1\t1\t0\t{}\t1\t{}\t{};\n", i + 1, type[i], num(pd[i]),
                     num(pd[i] * qfac), num(model.buses[i].voltage_kv), num(options.vmax), num(options.vmin));
  }
  m += "];\n\n";

  m += "%% generator data\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\nmpc.gen = [\n";
  for (const auto& g : model.generators) {
    m += fmt::format("\t{}\t0\t0\t{}\t{}\t1\t{}\t1\t{}\t{};\n", g.bus + 1, num(g.qmax_mvar), num(g.qmin_mvar),
                     num(model.base_mva), num(g.pmax_mw), num(g.pmin_mw));
  }
  for (const auto& c : model.condensers) {
    m += fmt::format("\t{}\t0\t0\t{}\t{}\t1\t{}\t{}\t0\t0;\n", c.bus + 1, num(c.qmax_mvar), num(c.qmin_mvar()),
                     num(model.base_mva), c.active ? 1 : 0);
  }
  m += "];\n\n";

  m += "%% branch data\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n";
  m += "mpc.branch = [\n";
  for (const auto& br : model.branches) {
    m += fmt::format("\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t0\t1\t-360\t360;\n", br.from + 1, br.to + 1, num(br.r),
                     num(br.x), num(br.b), num(br.rate_mva), num(br.rate_mva), num(br.rate_mva),
                     br.is_transformer() ? 1 : 0);
  }
  m += "];\n\n";

  m += "%% generator cost data\n%\t2\tstartup\tshutdown\tn\tc2\tc1\tc0\nmpc.gencost = [\n";
  for (const auto& g : model.generators) {
    m += fmt::format("\t2\t0\t0\t3\t{}\t{}\t{};\n", num(g.cost.c2), num(g.cost.c1), num(g.cost.c0));
  }
  for (std::size_t i = 0; i < model.condensers.size(); ++i) m += "\t2\t0\t0\t3\t0\t0\t0;\n";
  m += "];\n\n";

  m += "%% bus extension: id kind origin parent\nmpc.bus_info = {\n";
  for (const auto& b : model.buses) {
    m += fmt::format("\t{}\t'{}'\t{}\t{};\n", quote(b.id), kind_code(b.kind), quote_opt(b.origin), quote(b.parent));
  }
  m += "};\n%\tlat\tlon\nmpc.bus_geo = [\n";
  for (const auto& b : model.buses) m += fmt::format("\t{}\t{};\n", num(b.location.lat), num(b.location.lon));
  m += "];\n\n";

  m += "%% generator extension: id fuel plant_code unit_id\nmpc.gen_info = {\n";
  for (const auto& g : model.generators) {
    m += fmt::format("\t{}\t{}\t{}\t{};\n", quote(g.id), quote(geo::to_string(g.fuel)), quote_opt(g.plant_code),
                     quote_opt(g.unit_id));
  }
  for (std::size_t i = 0; i < model.condensers.size(); ++i) {
    m += fmt::format("\t{}\t{}\t[]\t[];\n", quote(fmt::format("SC{}", i + 1)), quote(kCondenserFuel));
  }
  m += "};\n%\tpower_factor\trenewable\tscalable\tcost_kind\nmpc.gen_ext = [\n";
  for (const auto& g : model.generators) {
    m += fmt::format("\t{}\t{}\t{}\t{};\n", num(g.power_factor), g.is_renewable ? 1 : 0, g.scalable_cap ? 1 : 0,
                     kind_code(g.cost.kind));
  }
  for (std::size_t i = 0; i < model.condensers.size(); ++i) m += "\t0\t0\t0\t2;\n";
  m += "];\n\n";

  m += "%% branch extension: id\nmpc.branch_info = {\n";
  for (const auto& br : model.branches) m += fmt::format("\t{};\n", quote(br.id));
  m += "};\n%\tkind\tkv_from\tkv_to\tmiles\toption\tcircuits\tdoubled\txr\nmpc.branch_ext = [\n";
  for (const auto& br : model.branches) {
    m += fmt::format("\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{};\n", kind_code(br.kind), num(br.kv_from), num(br.kv_to),
                     num(br.length_miles), br.option_index, br.circuits, br.doubled ? 1 : 0, num(br.xr_ratio));
  }
  m += "];\n\n";

  m += "%% load records: id and bus (0 when unassigned)\nmpc.load_info = {\n";
  for (std::size_t k = 0; k < model.load_bus.size(); ++k) {
    std::string id = model.loads && k < model.loads->size() ? (*model.loads)[k].tract_id : fmt::format("L{}", k + 1);
    m += fmt::format("\t{};\n", quote(id));
  }
  m += "};\nmpc.load_bus = [\n";
  for (int b : model.load_bus) m += fmt::format("\t{};\n", b + 1);
  m += "];\n";

  nlohmann::ordered_json doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = nlohmann::ordered_json::array();
  for (const auto& br : model.branches) {
    if (!br.is_line()) continue;
    nlohmann::ordered_json f;
    f["type"] = "Feature";
    auto& p = f["properties"];
    p["id"] = br.id;
    p["from"] = model.buses[br.from].id;
    p["to"] = model.buses[br.to].id;
    p["path_id"] = br.path.id;
    p["kv"] = br.path.voltage_kv;
    if (br.path.owner) p["owner"] = *br.path.owner;
    if (br.path.name) p["name"] = *br.path.name;
    p["rate_mva"] = br.rate_mva;
    auto options_json = nlohmann::ordered_json::array();
    for (const auto& o : br.options) {
      options_json.push_back({o.name, o.size_kcmil, o.ampacity_a, o.r_per_mile, o.gmr_ft, o.circuits, o.mva});
    }
    p["options"] = std::move(options_json);
    f["geometry"]["type"] = "LineString";
    auto coords = nlohmann::ordered_json::array();
    for (const auto& pt : br.path.points) coords.push_back({pt.lon, pt.lat});
    f["geometry"]["coordinates"] = std::move(coords);
    doc["features"].push_back(std::move(f));
  }
  return {std::move(m), doc.dump(1) + "\n"};
}

GridModel import_case(std::string_view matpower, std::string_view geojson) {
  auto st = Parser(strip_comments(matpower)).parse();
  GridModel model;
  model.base_mva = need(st, "baseMVA").matrix.at(0).at(0);
  if (st.count("load_power_factor")) model.load_power_factor = st.at("load_power_factor").matrix.at(0).at(0);

  const std::size_t nb = rows_of(st, "bus");
  const auto& bus = table(st, "bus", nb, 13);
  const auto& bus_info = cells(st, "bus_info", nb, 4);
  const auto& bus_geo = table(st, "bus_geo", nb, 2);
  for (std::size_t i = 0; i < nb; ++i) {
    if (std::lround(bus[i][0]) != static_cast<long>(i + 1)) {
      throw ValidationError(fmt::format("case file: bus row {} has number {}; buses must be numbered 1..n", i + 1,
                                        bus[i][0]));
    }
    Bus b;
    b.id = req(bus_info[i][0], "bus id");
    b.kind = static_cast<BusKind>(std::stoi(req(bus_info[i][1], "bus kind")));
    b.origin = bus_info[i][2];
    b.parent = req(bus_info[i][3], "bus parent");
    b.voltage_kv = bus[i][9];
    b.location = {bus_geo[i][0], bus_geo[i][1]};
    model.buses.push_back(std::move(b));
  }
  const int n = static_cast<int>(nb);

  const std::size_t ng = rows_of(st, "gen");
  const auto& gen = table(st, "gen", ng, 10);
  const auto& gencost = table(st, "gencost", ng, 7);
  const auto& gen_info = cells(st, "gen_info", ng, 4);
  const auto& gen_ext = table(st, "gen_ext", ng, 4);
  for (std::size_t i = 0; i < ng; ++i) {
    std::string fuel = req(gen_info[i][1], "generator fuel");
    int b = to_index(gen[i][0], n, fmt::format("generator row {}", i + 1));
    if (fuel == kCondenserFuel) {
      Condenser c;
      c.bus = b;
      c.qmax_mvar = gen[i][3];
      c.active = gen[i][7] != 0.0;
      model.condensers.push_back(c);
      continue;
    }
    Generator g;
    g.id = req(gen_info[i][0], "generator id");
    g.bus = b;
    auto parsed = geo::parse_fuel(fuel);
    if (!parsed) throw ValidationError(fmt::format("case file: generator {} has unknown fuel '{}'", g.id, fuel));
    g.fuel = *parsed;
    g.qmax_mvar = gen[i][3];
    g.qmin_mvar = gen[i][4];
    g.pmax_mw = gen[i][8];
    g.pmin_mw = gen[i][9];
    if (std::lround(gencost[i][0]) != 2 || std::lround(gencost[i][3]) != 3) {
      throw ValidationError(fmt::format("case file: gencost row {} is not a 3-term polynomial", i + 1));
    }
    g.cost.c2 = gencost[i][4];
    g.cost.c1 = gencost[i][5];
    g.cost.c0 = gencost[i][6];
    g.power_factor = gen_ext[i][0];
    g.is_renewable = gen_ext[i][1] != 0.0;
    g.scalable_cap = gen_ext[i][2] != 0.0;
    g.cost.kind = static_cast<CostKind>(std::lround(gen_ext[i][3]));
    g.plant_code = gen_info[i][2];
    g.unit_id = gen_info[i][3];
    model.generators.push_back(std::move(g));
  }

  const std::size_t nl = rows_of(st, "branch");
  const auto& branch = table(st, "branch", nl, 11);
  const auto& branch_info = cells(st, "branch_info", nl, 1);
  const auto& branch_ext = table(st, "branch_ext", nl, 8);
  for (std::size_t i = 0; i < nl; ++i) {
    Branch br;
    br.id = req(branch_info[i][0], "branch id");
    br.from = to_index(branch[i][0], n, "branch " + br.id);
    br.to = to_index(branch[i][1], n, "branch " + br.id);
    br.r = branch[i][2];
    br.x = branch[i][3];
    br.b = branch[i][4];
    br.rate_mva = branch[i][5];
    br.kind = static_cast<BranchKind>(std::lround(branch_ext[i][0]));
    br.kv_from = branch_ext[i][1];
    br.kv_to = branch_ext[i][2];
    br.length_miles = branch_ext[i][3];
    br.option_index = static_cast<int>(std::lround(branch_ext[i][4]));
    br.circuits = static_cast<int>(std::lround(branch_ext[i][5]));
    br.doubled = branch_ext[i][6] != 0.0;
    br.xr_ratio = branch_ext[i][7];
    model.branches.push_back(std::move(br));
  }

  const std::size_t nload = rows_of(st, "load_bus");
  const auto& load_bus = table(st, "load_bus", nload, 1);
  for (std::size_t k = 0; k < nload; ++k) {
    double v = load_bus[k][0];
    model.load_bus.push_back(v == 0.0 ? -1 : to_index(v, n, fmt::format("load row {}", k + 1)));
  }

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(geojson);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("case path sidecar: ") + e.what());
  }
  if (!doc.contains("features") || !doc["features"].is_array()) {
    throw ValidationError("case path sidecar: not a FeatureCollection");
  }
  std::map<std::string, int> by_id;
  for (int k = 0; k < model.num_branches(); ++k) by_id[model.branches[k].id] = k;
  int lines_seen = 0;
  for (const auto& f : doc["features"]) {
    const auto& p = f.at("properties");
    auto id = p.at("id").get<std::string>();
    auto it = by_id.find(id);
    if (it == by_id.end() || !model.branches[it->second].is_line()) {
      throw ValidationError(fmt::format("case path sidecar: feature {} matches no line branch", id));
    }
    auto& br = model.branches[it->second];
    br.path.id = p.at("path_id").get<std::string>();
    br.path.voltage_kv = p.at("kv").get<double>();
    if (p.contains("owner")) br.path.owner = p["owner"].get<std::string>();
    if (p.contains("name")) br.path.name = p["name"].get<std::string>();
    for (const auto& o : p.at("options")) {
      ConductorOption opt;
      opt.name = o.at(0).get<std::string>();
      opt.size_kcmil = o.at(1).get<double>();
      opt.ampacity_a = o.at(2).get<double>();
      opt.r_per_mile = o.at(3).get<double>();
      opt.gmr_ft = o.at(4).get<double>();
      opt.circuits = o.at(5).get<int>();
      opt.mva = o.at(6).get<double>();
      br.options.push_back(std::move(opt));
    }
    for (const auto& c : f.at("geometry").at("coordinates")) {
      br.path.points.push_back({c.at(1).get<double>(), c.at(0).get<double>()});
    }
    ++lines_seen;
  }
  if (lines_seen != model.num_lines()) {
    throw ValidationError(fmt::format("case path sidecar has {} features for {} lines", lines_seen, model.num_lines()));
  }
  return model;
}

std::vector<std::string> case_load_ids(std::string_view matpower) {
  auto st = Parser(strip_comments(matpower)).parse();
  std::vector<std::string> out;
  auto it = st.find("load_info");
  if (it == st.end()) return out;
  for (const auto& row : it->second.cells) out.push_back(req(row.at(0), "load id"));
  return out;
}

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(fmt::format("cannot write {}", path.string()));
  out << text;
}

std::filesystem::path with_ext(std::filesystem::path stem, const char* ext) { return stem += ext; }

}  // namespace

void write_case(const std::filesystem::path& stem, const GridModel& model, const ExportOptions& options) {
  auto text = export_case(model, options);
  spit(with_ext(stem, ".m"), text.matpower);
  spit(with_ext(stem, ".geojson"), text.geojson);
}

GridModel read_case(const std::filesystem::path& stem) {
  return import_case(slurp(with_ext(stem, ".m")), slurp(with_ext(stem, ".geojson")));
}

std::optional<std::string> compare_models(const GridModel& a, const GridModel& b, double tol) {
  auto close = [tol](double x, double y) { return std::abs(x - y) <= tol * std::max(1.0, std::abs(x)); };
  auto diff = [](const std::string& where, auto x, auto y) {
    return std::optional<std::string>(fmt::format("{}: {} vs {}", where, x, y));
  };
  if (!close(a.base_mva, b.base_mva)) return diff("base_mva", a.base_mva, b.base_mva);
  if (!close(a.load_power_factor, b.load_power_factor)) return diff("load_power_factor", a.load_power_factor, b.load_power_factor);
  if (a.num_buses() != b.num_buses()) return diff("bus count", a.num_buses(), b.num_buses());
  for (int i = 0; i < a.num_buses(); ++i) {
    const auto &x = a.buses[i], &y = b.buses[i];
    std::string w = "bus " + x.id;
    if (x.id != y.id) return diff(w + " id", x.id, y.id);
    if (x.kind != y.kind) return diff(w + " kind", to_string(x.kind), to_string(y.kind));
    if (x.origin != y.origin || x.parent != y.parent) return diff(w + " origin/parent", x.parent, y.parent);
    if (!close(x.voltage_kv, y.voltage_kv)) return diff(w + " kv", x.voltage_kv, y.voltage_kv);
    if (!close(x.location.lat, y.location.lat) || !close(x.location.lon, y.location.lon)) {
      return diff(w + " location", x.location.lat, y.location.lat);
    }
  }
  if (a.generators.size() != b.generators.size()) return diff("generator count", a.generators.size(), b.generators.size());
  for (std::size_t i = 0; i < a.generators.size(); ++i) {
    const auto &x = a.generators[i], &y = b.generators[i];
    std::string w = "generator " + x.id;
    if (x.id != y.id || x.bus != y.bus || x.fuel != y.fuel) return diff(w + " identity", x.id, y.id);
    if (x.is_renewable != y.is_renewable || x.scalable_cap != y.scalable_cap || x.cost.kind != y.cost.kind) {
      return diff(w + " flags", x.is_renewable, y.is_renewable);
    }
    if (x.plant_code != y.plant_code || x.unit_id != y.unit_id) return diff(w + " keys", x.id, y.id);
    const double xs[] = {x.pmax_mw, x.pmin_mw, x.qmax_mvar, x.qmin_mvar, x.power_factor, x.cost.c2, x.cost.c1, x.cost.c0};
    const double ys[] = {y.pmax_mw, y.pmin_mw, y.qmax_mvar, y.qmin_mvar, y.power_factor, y.cost.c2, y.cost.c1, y.cost.c0};
    for (int k = 0; k < 8; ++k) {
      if (!close(xs[k], ys[k])) return diff(fmt::format("{} field {}", w, k), xs[k], ys[k]);
    }
  }
  if (a.condensers.size() != b.condensers.size()) return diff("condenser count", a.condensers.size(), b.condensers.size());
  for (std::size_t i = 0; i < a.condensers.size(); ++i) {
    const auto &x = a.condensers[i], &y = b.condensers[i];
    if (x.bus != y.bus || x.active != y.active || !close(x.qmax_mvar, y.qmax_mvar)) {
      return diff(fmt::format("condenser {}", i), x.bus, y.bus);
    }
  }
  if (a.num_branches() != b.num_branches()) return diff("branch count", a.num_branches(), b.num_branches());
  for (int i = 0; i < a.num_branches(); ++i) {
    const auto &x = a.branches[i], &y = b.branches[i];
    std::string w = "branch " + x.id;
    if (x.id != y.id || x.from != y.from || x.to != y.to || x.kind != y.kind) return diff(w + " identity", x.id, y.id);
    if (x.option_index != y.option_index || x.circuits != y.circuits || x.doubled != y.doubled) {
      return diff(w + " option", x.option_index, y.option_index);
    }
    const double xs[] = {x.kv_from, x.kv_to, x.length_miles, x.r, x.x, x.b, x.rate_mva, x.xr_ratio};
    const double ys[] = {y.kv_from, y.kv_to, y.length_miles, y.r, y.x, y.b, y.rate_mva, y.xr_ratio};
    for (int k = 0; k < 8; ++k) {
      if (!close(xs[k], ys[k])) return diff(fmt::format("{} field {}", w, k), xs[k], ys[k]);
    }
    if (x.path.id != y.path.id || x.path.owner != y.path.owner || x.path.name != y.path.name ||
        !close(x.path.voltage_kv, y.path.voltage_kv) || x.path.points.size() != y.path.points.size()) {
      return diff(w + " path", x.path.id, y.path.id);
    }
    for (std::size_t k = 0; k < x.path.points.size(); ++k) {
      if (!close(x.path.points[k].lat, y.path.points[k].lat) || !close(x.path.points[k].lon, y.path.points[k].lon)) {
        return diff(fmt::format("{} path point {}", w, k), x.path.points[k].lat, y.path.points[k].lat);
      }
    }
    if (x.options.size() != y.options.size()) return diff(w + " option count", x.options.size(), y.options.size());
    for (std::size_t k = 0; k < x.options.size(); ++k) {
      const auto &o = x.options[k], &q = y.options[k];
      if (o.name != q.name || o.circuits != q.circuits || !close(o.size_kcmil, q.size_kcmil) ||
          !close(o.ampacity_a, q.ampacity_a) || !close(o.r_per_mile, q.r_per_mile) || !close(o.gmr_ft, q.gmr_ft) ||
          !close(o.mva, q.mva)) {
        return diff(fmt::format("{} option {}", w, k), o.name, q.name);
      }
    }
  }
  if (a.load_bus != b.load_bus) return diff("load_bus", a.load_bus.size(), b.load_bus.size());
  return std::nullopt;
}

}  // namespace gridsynth::caseio
