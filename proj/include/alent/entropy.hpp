#pragma once

// Alignment entropy H = -sum_pi p(pi) log p(pi), p(pi) = w(pi) / alpha, over
// all paths of a lattice, computed with one forward sweep in the entropy
// semiring. Per state the cell holds (alpha, A) for the prefix paths ending
// there; an arc e extends it as
//   A' = w_e * (A + alpha * log w_e)
// which is ew_times(cell, ew_arc(w_e)).

#include <cmath>
#include <vector>

#include "alent/lattice.hpp"
#include "alent/numerics.hpp"

namespace alent {

struct ForwardTable {
  std::vector<EntropyWeight> cells;  // indexed like Lattice::states()

  const EntropyWeight& final_cell() const { return cells.back(); }
};

struct EntropyReport {
  double entropy = 0.0;         // nats
  double log_likelihood = 0.0;  // log alpha at the final state
  double max_entropy = 0.0;     // log(number of paths)
  double normalized_entropy = 0.0;
};

inline ForwardTable forward_entropy(const Lattice& lat) {
  ForwardTable table;
  table.cells.assign(lat.num_states(), EntropyWeight::zero());
  table.cells[lat.initial()] = EntropyWeight::one();
  const auto& arcs = lat.arcs();
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    auto& dst = table.cells[lat.dst_index(i)];
    dst = ew_plus(dst, ew_times(table.cells[lat.src_index(i)], ew_arc(arcs[i].weight)));
  }
  if (table.final_cell().alpha == kNegInf)
    throw Error(ErrorCode::EmptyLattice, "final state carries no weight");
  return table;
}

/// Suffix sums: cell s holds (alpha, A) over paths from s to the final state.
inline ForwardTable backward_entropy(const Lattice& lat) {
  ForwardTable table;
  table.cells.assign(lat.num_states(), EntropyWeight::zero());
  table.cells[lat.final_state()] = EntropyWeight::one();
  const auto& arcs = lat.arcs();
  for (std::size_t i = arcs.size(); i-- > 0;) {
    auto& src = table.cells[lat.src_index(i)];
    src = ew_plus(src, ew_times(ew_arc(arcs[i].weight), table.cells[lat.dst_index(i)]));
  }
  return table;
}

inline EntropyReport alignment_entropy(const Lattice& lat) {
  const auto table = forward_entropy(lat);
  EntropyReport r;
  r.entropy = ew_entropy(table.final_cell());
  r.log_likelihood = table.final_cell().alpha;
  r.max_entropy = log_num_paths(lat);
  r.normalized_entropy = r.max_entropy > 0.0 ? r.entropy / r.max_entropy : 0.0;
  return r;
}

struct EntropyGradients {
  double entropy = 0.0;
  double log_likelihood = 0.0;
  std::vector<double> d_entropy;    // dH / d(arc log-weight)
  std::vector<double> d_loglik;     // d log alpha / d(arc log-weight) = arc posterior
};

// With r(s) = A/alpha (expected log-weight) from each side,
//   dH/dw_e = -gamma_e * (r_fwd(src) + w_e + r_bwd(dst) - r_total)
// where gamma_e is the arc posterior. This is the reverse sweep of the forward
// recursion expressed as an outside pass.
inline EntropyGradients entropy_gradients(const Lattice& lat) {
  const auto fwd = forward_entropy(lat);
  const auto bwd = backward_entropy(lat);
  const auto& total = fwd.final_cell();

  EntropyGradients g;
  g.entropy = ew_entropy(total);
  g.log_likelihood = total.alpha;
  const double r_total = ew_mean_log_weight(total);

  const auto& arcs = lat.arcs();
  g.d_entropy.assign(arcs.size(), 0.0);
  g.d_loglik.assign(arcs.size(), 0.0);
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    const auto& f = fwd.cells[lat.src_index(i)];
    const auto& b = bwd.cells[lat.dst_index(i)];
    const double w = arcs[i].weight;
    if (f.alpha == kNegInf || b.alpha == kNegInf || w == kNegInf) continue;
    const double gamma = std::exp(f.alpha + w + b.alpha - total.alpha);
    if (gamma == 0.0) continue;
    g.d_loglik[i] = gamma;
    g.d_entropy[i] =
        -gamma * (ew_mean_log_weight(f) + w + ew_mean_log_weight(b) - r_total);
  }
  return g;
}

inline std::vector<double> entropy_grad(const Lattice& lat) {
  return entropy_gradients(lat).d_entropy;
}

}  // namespace alent
