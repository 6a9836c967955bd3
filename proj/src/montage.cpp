#include <cmath>

#include "favc/common.hpp"
#include "favc/dataset.hpp"
#include "favc/rng.hpp"
#include "json.hpp"

namespace favc {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg = kPi / 180.0;

// inclination from vertex, azimuth from the nose meridian (negative = left)
std::array<double, 3> sphere_point(double incl_deg, double az_deg) {
  double th = incl_deg * kDeg;
  double az = az_deg * kDeg;
  return {std::sin(th) * std::sin(az), std::sin(th) * std::cos(az), std::cos(th)};
}

std::array<double, 3> slerp_mid(const std::array<double, 3>& a,
                                const std::array<double, 3>& b) {
  double d = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  double omega = std::acos(std::max(-1.0, std::min(1.0, d)));
  double s = std::sin(omega);
  double wa = std::sin(0.5 * omega) / s;
  std::array<double, 3> m = {wa * (a[0] + b[0]), wa * (a[1] + b[1]),
                             wa * (a[2] + b[2])};
  double n = std::sqrt(m[0] * m[0] + m[1] * m[1] + m[2] * m[2]);
  return {m[0] / n, m[1] / n, m[2] / n};
}

std::array<double, 2> project_aed(const std::array<double, 3>& p) {
  double theta = std::acos(std::max(-1.0, std::min(1.0, p[2])));
  double r = std::hypot(p[0], p[1]);
  if (r < 1e-12) return {0.0, 0.0};
  return {theta * p[0] / r, theta * p[1] / r};
}

}  // namespace

const std::array<std::string, kNumChannels>& channel_names() {
  static const std::array<std::string, kNumChannels> names = {
      "Fp1", "Fp2", "F7", "F8",                                       // sources
      "F3",  "Fz",  "F4", "T3", "C3", "Cz", "C4", "T4", "T5", "P3",
      "Pz",  "P4",  "T6"};
  return names;
}

int Montage::index_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  fail_config("montage: unknown channel " + name);
}

Montage standard_montage() {
  Montage m;
  m.names.assign(channel_names().begin(), channel_names().end());

  auto ring = [](double az) { return sphere_point(90.0, az); };
  std::array<double, 3> Fp1 = ring(-18), Fp2 = ring(18);
  std::array<double, 3> F7 = ring(-54), F8 = ring(54);
  std::array<double, 3> T3 = ring(-90), T4 = ring(90);
  std::array<double, 3> T5 = ring(-126), T6 = ring(126);
  std::array<double, 3> Fz = sphere_point(36, 0);
  std::array<double, 3> Cz = sphere_point(0, 0);
  std::array<double, 3> Pz = sphere_point(36, 180);
  std::array<double, 3> F3 = slerp_mid(Fz, F7), F4 = slerp_mid(Fz, F8);
  std::array<double, 3> C3 = slerp_mid(Cz, T3), C4 = slerp_mid(Cz, T4);
  std::array<double, 3> P3 = slerp_mid(Pz, T5), P4 = slerp_mid(Pz, T6);

  m.pos3 = {Fp1, Fp2, F7, F8, F3, Fz, F4, T3, C3,
            Cz,  C4,  T4, T5, P3, Pz, P4, T6};
  m.pos2.reserve(m.pos3.size());
  for (const auto& p : m.pos3) m.pos2.push_back(project_aed(p));
  for (int i = 0; i < kNumSources; ++i) m.source_idx.push_back(i);
  for (int i = kNumSources; i < kNumChannels; ++i) m.target_idx.push_back(i);
  return m;
}

std::string Montage::to_json() const {
  nlohmann::json j;
  j["names"] = names;
  for (size_t i = 0; i < pos3.size(); ++i) {
    j["pos3"].push_back({pos3[i][0], pos3[i][1], pos3[i][2]});
    j["pos2"].push_back({pos2[i][0], pos2[i][1]});
  }
  j["sources"] = source_idx;
  j["targets"] = target_idx;
  return j.dump();
}

Montage Montage::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Montage m;
  m.names = j.at("names").get<std::vector<std::string>>();
  for (const auto& p : j.at("pos3"))
    m.pos3.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
  for (const auto& p : j.at("pos2"))
    m.pos2.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  m.source_idx = j.at("sources").get<std::vector<int>>();
  m.target_idx = j.at("targets").get<std::vector<int>>();
  for (const auto& p : m.pos3) {
    double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    if (std::fabs(n - 1.0) > 1e-9)
      fail_config("montage: coordinate is not unit-norm");
  }
  return m;
}

uint64_t Montage::fingerprint() const { return Rng::hash_str(to_json()); }

}  // namespace favc
