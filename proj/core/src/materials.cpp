#include "spectral_ct/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sct {

namespace {

struct TablePoint {
  double energy_kev;
  double mass_atten;  // cm²/g
};

struct MaterialTable {
  const char* name;
  double density;  // g/cm³
  std::vector<TablePoint> points;
  double edge_kev;  // absorption edge inside the table range, 0 if none
};

// Mass attenuation coefficients with coherent scattering, transcribed from
// NIST XCOM / Hubbell–Seltzer tables. Soft tissue and cortical bone are the
// ICRU-44 compositions. Iodine lists both sides of its K edge.
const std::vector<MaterialTable>& tables() {
  static const std::vector<MaterialTable> t = {
      {"soft", 1.06, {{10, 5.379}, {15, 1.695}, {20, 0.8205}, {30, 0.3790}, {40, 0.2688}, {50, 0.2264}, {60, 0.2048}}, 0.0},
      {"bone", 1.92, {{10, 28.51}, {15, 9.032}, {20, 4.001}, {30, 1.331}, {40, 0.6655}, {50, 0.4242}, {60, 0.3148}}, 0.0},
      {"water", 1.00, {{10, 5.329}, {15, 1.673}, {20, 0.8096}, {30, 0.3756}, {40, 0.2683}, {50, 0.2269}, {60, 0.2059}}, 0.0},
      {"iodine",
       4.93,
       {{10, 162.6}, {15, 55.47}, {20, 25.67}, {30, 8.531}, {33.1694, 6.551}, {33.1694, 35.82}, {40, 22.10}, {50, 12.32},
        {60, 7.141}},
       33.1694},
  };
  return t;
}

double interpolate(const MaterialTable& table, double e) {
  // Restrict to the side of the absorption edge that contains e.
  std::vector<TablePoint> pts;
  for (std::size_t i = 0; i < table.points.size(); ++i) {
    const auto& p = table.points[i];
    if (table.edge_kev > 0.0) {
      const bool above = e >= table.edge_kev;
      const bool next_is_same_energy = i + 1 < table.points.size() && table.points[i + 1].energy_kev == p.energy_kev;
      const bool prev_is_same_energy = i > 0 && table.points[i - 1].energy_kev == p.energy_kev;
      if (above && p.energy_kev < table.edge_kev) continue;
      if (above && next_is_same_energy) continue;
      if (!above && p.energy_kev > table.edge_kev) continue;
      if (!above && prev_is_same_energy) continue;
    }
    pts.push_back(p);
  }
  if (e < pts.front().energy_kev || e > pts.back().energy_kev) {
    throw std::invalid_argument(std::string("energy outside attenuation table for ") + table.name);
  }
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (e <= pts[i + 1].energy_kev) {
      const double t = (std::log(e) - std::log(pts[i].energy_kev)) /
                       (std::log(pts[i + 1].energy_kev) - std::log(pts[i].energy_kev));
      return std::exp((1.0 - t) * std::log(pts[i].mass_atten) + t * std::log(pts[i + 1].mass_atten));
    }
  }
  return pts.back().mass_atten;
}

}  // namespace

std::vector<double> reference_channel_edges() { return {16, 22, 25, 28, 31, 34, 37, 41, 50}; }

std::vector<double> desk_channel_edges() { return {16, 25, 31, 37, 50}; }

std::vector<std::string> known_materials() {
  std::vector<std::string> out;
  for (const auto& t : tables()) out.emplace_back(t.name);
  return out;
}

MaterialBasis xcom_basis(const std::vector<std::string>& names, const std::vector<double>& channel_edges) {
  if (channel_edges.size() < 2) throw std::invalid_argument("need at least one energy channel");
  MaterialBasis basis;
  basis.names = names;
  basis.channel_edges = channel_edges;
  const std::size_t S = channel_edges.size() - 1;
  basis.mu.resize(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(names.size()));
  for (std::size_t m = 0; m < names.size(); ++m) {
    const auto it = std::find_if(tables().begin(), tables().end(),
                                 [&](const MaterialTable& t) { return names[m] == t.name; });
    if (it == tables().end()) throw std::invalid_argument("no attenuation data for material '" + names[m] + "'");
    for (std::size_t s = 0; s < S; ++s) {
      const double centre = 0.5 * (channel_edges[s] + channel_edges[s + 1]);
      basis.mu(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(m)) = interpolate(*it, centre) * it->density;
    }
  }
  basis.validate();
  return basis;
}

std::size_t MaterialBasis::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::invalid_argument("unknown material '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

void MaterialBasis::validate() const {
  if (mu.cols() < 1) throw std::invalid_argument("material basis needs at least one material");
  if (names.size() != materials()) throw std::invalid_argument("material names do not match basis columns");
  if (channel_edges.size() != channels() + 1) throw std::invalid_argument("channel edges must number S+1");
  for (std::size_t s = 1; s < channel_edges.size(); ++s) {
    if (!(channel_edges[s] > channel_edges[s - 1])) throw std::invalid_argument("channel edges must increase");
  }
  if ((mu.array() < 0.0).any() || !mu.allFinite()) throw std::invalid_argument("attenuation must be finite and >= 0");
}

}  // namespace sct
