#include "lddl/model_io.hpp"

#include <fstream>

#include "lddl/error.hpp"

namespace lddl {

using nlohmann::json;

namespace {

double get_or(const json& j, const char* key, double fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_number()) {
    throw ModelError(std::string("field '") + key + "' must be a number");
  }
  return it->get<double>();
}

int get_int(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number_integer()) {
    throw ModelError(std::string("field '") + key + "' must be an integer");
  }
  return it->get<int>();
}

Device parse_device(const json& d) {
  const std::string type = d.value("type", "");
  if (type == "sg") {
    SynchronousGenerator g;
    g.bus = get_int(d, "bus");
    g.inertia = get_or(d, "M", g.inertia);
    g.damping = get_or(d, "D", g.damping);
    g.mech_power = get_or(d, "P", g.mech_power);
    g.reactance = get_or(d, "x", g.reactance);
    g.v_set = get_or(d, "V_set", g.v_set);
    return g;
  }
  if (type == "gfm") {
    GfmInverter inv;
    inv.bus = get_int(d, "bus");
    inv.m_p = get_or(d, "m_p", inv.m_p);
    inv.m_q = get_or(d, "m_q", inv.m_q);
    inv.tau = get_or(d, "tau", inv.tau);
    inv.k_pv = get_or(d, "k_pv", inv.k_pv);
    inv.k_iv = get_or(d, "k_iv", inv.k_iv);
    inv.p_set = get_or(d, "P_set", inv.p_set);
    inv.q_set = get_or(d, "Q_set", inv.q_set);
    inv.v_set = get_or(d, "V_set", inv.v_set);
    inv.t_l = get_or(d, "T_L", inv.t_l);
    inv.reactance = get_or(d, "x", inv.reactance);
    return inv;
  }
  throw ModelError("device type must be \"sg\" or \"gfm\", got \"" + type +
                   "\"");
}

}  // namespace

GridModel parse_model(const json& j) {
  if (!j.is_object()) throw ModelError("model must be a JSON object");
  GridModel m;
  m.base_mva = get_or(j, "base_mva", m.base_mva);
  m.nominal_hz = get_or(j, "nominal_hz", m.nominal_hz);

  for (const json& b : j.value("buses", json::array())) {
    Bus bus;
    bus.id = get_int(b, "id");
    bus.shunt_g = get_or(b, "G", 0.0);
    bus.shunt_b = get_or(b, "B", 0.0);
    bus.load_p = get_or(b, "P_load", 0.0);
    bus.load_q = get_or(b, "Q_load", 0.0);
    m.buses.push_back(bus);
  }
  for (const json& l : j.value("lines", json::array())) {
    Line line;
    line.from = get_int(l, "from");
    line.to = get_int(l, "to");
    if (get_or(l, "r", 0.0) != 0.0) {
      throw ModelError("line " + std::to_string(line.from) + "-" +
                       std::to_string(line.to) +
                       ": resistive lines are not supported");
    }
    if (l.contains("b")) {
      line.b = get_or(l, "b", 0.0);
    } else if (l.contains("x")) {
      const double x = get_or(l, "x", 0.0);
      if (!(x > 0.0)) throw ModelError("line reactance must be positive");
      line.b = 1.0 / x;
    } else {
      throw ModelError("line needs \"b\" or \"x\"");
    }
    m.lines.push_back(line);
  }
  for (const json& d : j.value("devices", json::array())) {
    m.devices.push_back(parse_device(d));
  }
  return m;
}

GridModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ModelError(path.string() + ": " + e.what());
  }
  return parse_model(j);
}

json model_to_json(const GridModel& model) {
  json j;
  j["base_mva"] = model.base_mva;
  j["nominal_hz"] = model.nominal_hz;
  j["buses"] = json::array();
  for (const Bus& b : model.buses) {
    j["buses"].push_back({{"id", b.id},
                          {"G", b.shunt_g},
                          {"B", b.shunt_b},
                          {"P_load", b.load_p},
                          {"Q_load", b.load_q}});
  }
  j["lines"] = json::array();
  for (const Line& l : model.lines) {
    j["lines"].push_back({{"from", l.from}, {"to", l.to}, {"b", l.b}});
  }
  j["devices"] = json::array();
  for (const Device& d : model.devices) {
    if (const auto* g = std::get_if<SynchronousGenerator>(&d)) {
      j["devices"].push_back({{"type", "sg"},
                              {"bus", g->bus},
                              {"M", g->inertia},
                              {"D", g->damping},
                              {"P", g->mech_power},
                              {"x", g->reactance},
                              {"V_set", g->v_set}});
    } else {
      const auto& inv = std::get<GfmInverter>(d);
      j["devices"].push_back({{"type", "gfm"},
                              {"bus", inv.bus},
                              {"m_p", inv.m_p},
                              {"m_q", inv.m_q},
                              {"tau", inv.tau},
                              {"k_pv", inv.k_pv},
                              {"k_iv", inv.k_iv},
                              {"P_set", inv.p_set},
                              {"Q_set", inv.q_set},
                              {"V_set", inv.v_set},
                              {"T_L", inv.t_l},
                              {"x", inv.reactance}});
    }
  }
  return j;
}

}  // namespace lddl
