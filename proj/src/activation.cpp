#include "ecgfwd/activation.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <vector>

#include "ecgfwd/errors.hpp"

namespace ecgfwd {

namespace {

// Fibre axis at an edge: the (normalized) sum of the fibres of its incident
// faces, with signs aligned so antiparallel axes reinforce rather than
// cancel. Falls back to the first face's fibre if the sum degenerates.
Eigen::Vector3d edge_fibre(const SurfaceMesh& mesh, const std::vector<int>& faces_at_edge) {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d first = mesh.fibres.row(faces_at_edge.front());
  for (int f : faces_at_edge) {
    Eigen::Vector3d fib = mesh.fibres.row(f);
    if (fib.dot(first) < 0.0) fib = -fib;  // fibres are axes, not arrows
    sum += fib;
  }
  if (sum.norm() < 1e-12) return first;
  return sum.normalized();
}

}  // namespace

ActivationField activation_times(const SurfaceMesh& mesh, int pacing_node, double cv_long,
                                 double aniso) {
  if (pacing_node < 0 || pacing_node >= mesh.n_vertices())
    throw ValidationError("activation_times: pacing node " + std::to_string(pacing_node) +
                          " out of range");
  if (cv_long <= 0.0) throw ValidationError("activation_times: cv_long must be > 0");
  if (aniso < 1.0) throw ValidationError("activation_times: aniso must be >= 1");
  if (aniso != 1.0 && !mesh.has_fibres())
    throw ValidationError("activation_times: mesh has no fibres (required for aniso > 1)");

  // Incident faces per undirected edge, for the local fibre axis.
  std::map<std::pair<int, int>, std::vector<int>> edge_faces;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    for (int k = 0; k < 3; ++k) {
      int a = mesh.faces(f, k), b = mesh.faces(f, (k + 1) % 3);
      if (a > b) std::swap(a, b);
      edge_faces[{a, b}].push_back(f);
    }
  }

  // Weighted adjacency; cost in ms since mm / (m/s) = ms.
  const double inv_aniso2 = 1.0 / (aniso * aniso);
  std::vector<std::vector<std::pair<int, double>>> adj(mesh.n_vertices());
  for (const auto& [edge, faces] : edge_faces) {
    const Eigen::Vector3d d = mesh.vertices.row(edge.second) - mesh.vertices.row(edge.first);
    const double len = d.norm();
    double speed = cv_long;
    if (aniso != 1.0) {
      const Eigen::Vector3d fib = edge_fibre(mesh, faces);
      const double cos2 = std::min(1.0, std::pow(d.normalized().dot(fib), 2.0));
      speed = cv_long * std::sqrt(cos2 + (1.0 - cos2) * inv_aniso2);
    }
    const double cost = len / speed;
    adj[edge.first].emplace_back(edge.second, cost);
    adj[edge.second].emplace_back(edge.first, cost);
  }

  // Label-setting (Dijkstra) from the pacing node.
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd times = Eigen::VectorXd::Constant(mesh.n_vertices(), inf);
  times(pacing_node) = 0.0;
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue;
  queue.push({0.0, pacing_node});
  while (!queue.empty()) {
    const auto [t, i] = queue.top();
    queue.pop();
    if (t > times(i)) continue;
    for (const auto& [j, cost] : adj[i]) {
      const double cand = t + cost;
      if (cand < times(j)) {
        times(j) = cand;
        queue.push({cand, j});
      }
    }
  }

  for (int i = 0; i < mesh.n_vertices(); ++i)
    if (!std::isfinite(times(i)))
      throw ValidationError("activation_times: node " + std::to_string(i) +
                            " unreachable from pacing node");

  ActivationField field;
  field.times = std::move(times);
  field.pacing_node = pacing_node;
  field.cv_long = cv_long;
  field.aniso = aniso;
  return field;
}

double ap_template(double t_rel, const ApParams& params) {
  if (params.upstroke_ms <= 0.0)
    throw ValidationError("ap_template: upstroke_ms must be > 0");
  if (params.apd_ms <= params.upstroke_ms)
    throw ValidationError("ap_template: apd_ms must exceed upstroke_ms");

  if (t_rel < 0.0 || t_rel >= params.apd_ms) return params.v_rest;
  const double swing = params.v_peak - params.v_rest;
  if (t_rel <= params.upstroke_ms)
    return params.v_rest + swing * (t_rel / params.upstroke_ms);
  const double phase = (t_rel - params.upstroke_ms) / (params.apd_ms - params.upstroke_ms);
  return params.v_rest + swing * 0.5 * (1.0 + std::cos(std::numbers::pi * phase));
}

VoltageSequence gen_voltage_sequence(const SurfaceMesh& mesh, const ActivationField& act,
                                     const ApParams& params, double frame_dt, double duration) {
  if (act.times.size() != mesh.n_vertices())
    throw ValidationError("gen_voltage_sequence: activation field has " +
                          std::to_string(act.times.size()) + " times for " +
                          std::to_string(mesh.n_vertices()) + " vertices");
  if (frame_dt <= 0.0) throw ValidationError("gen_voltage_sequence: frame_dt must be > 0");
  if (duration < frame_dt)
    throw ValidationError("gen_voltage_sequence: duration shorter than one frame");

  const int n_frames = static_cast<int>(std::floor(duration / frame_dt + 1e-9)) + 1;
  VoltageSequence seq;
  seq.frames.resize(n_frames, mesh.n_vertices());
  seq.frame_dt = frame_dt;
  seq.t0 = 0.0;
  seq.duration_truncated = duration < act.times.maxCoeff() + params.apd_ms;
  for (int t = 0; t < n_frames; ++t)
    for (int i = 0; i < mesh.n_vertices(); ++i)
      seq.frames(t, i) = ap_template(t * frame_dt - act.times(i), params);
  return seq;
}

}  // namespace ecgfwd
