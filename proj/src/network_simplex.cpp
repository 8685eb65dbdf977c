#include "network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wproj/error.hpp"

namespace wproj::detail {

NetworkSimplex::NetworkSimplex(std::vector<double> supply, std::vector<double> demand,
                               const std::vector<std::int32_t>& arc_source,
                               const std::vector<std::int32_t>& arc_target, const std::vector<double>& arc_cost,
                               double cost_bound)
    : n_src_(static_cast<std::int32_t>(supply.size())),
      node_num_(static_cast<std::int32_t>(supply.size() + demand.size())),
      root_(node_num_) {
  supply_.resize(static_cast<std::size_t>(node_num_) + 1);
  double total = 0.0;
  for (std::int32_t u = 0; u < n_src_; ++u) {
    supply_[u] = supply[u];
    total += supply[u];
  }
  for (std::size_t k = 0; k < demand.size(); ++k) {
    supply_[n_src_ + k] = -demand[k];
    total -= demand[k];
  }
  supply_[root_] = -total;

  const std::size_t all_nodes = static_cast<std::size_t>(node_num_) + 1;
  arc_source_.resize(static_cast<std::size_t>(node_num_));
  arc_target_.resize(static_cast<std::size_t>(node_num_));
  arc_cost_.resize(static_cast<std::size_t>(node_num_));
  flow_.assign(static_cast<std::size_t>(node_num_), 0.0);
  state_.assign(static_cast<std::size_t>(node_num_), kLower);
  parent_.resize(all_nodes);
  pred_.resize(all_nodes);
  thread_.resize(all_nodes);
  rev_thread_.resize(all_nodes);
  succ_num_.resize(all_nodes);
  last_succ_.resize(all_nodes);
  pred_dir_.resize(all_nodes);
  pi_.resize(all_nodes);

  double max_cost = std::max(cost_bound, 0.0);
  for (double c : arc_cost) max_cost = std::max(max_cost, std::abs(c));
  max_arc_cost_ = max_cost;
  art_cost_value_ = (max_cost + 1.0) * static_cast<double>(node_num_);
  // Potentials can reach the artificial cost in magnitude; this bounds the
  // rounding noise in reduced costs. The optimality gap of the returned
  // plan is at most rc_tol_ times the total mass.
  rc_tol_ = 1e-13 * art_cost_value_;
  add_arcs(arc_source, arc_target, arc_cost);
}

void NetworkSimplex::add_arcs(const std::vector<std::int32_t>& arc_source, const std::vector<std::int32_t>& arc_target,
                              const std::vector<double>& arc_cost) {
  if (arc_target.size() != arc_source.size() || arc_cost.size() != arc_source.size()) {
    throw Error(ErrorCode::DimensionMismatch, "arc arrays differ in length");
  }
  for (double c : arc_cost) {
    if (!(std::abs(c) <= max_arc_cost_)) {
      throw Error(ErrorCode::OutOfRange, "arc cost exceeds the bound given at construction");
    }
  }
  arc_source_.insert(arc_source_.end(), arc_source.begin(), arc_source.end());
  arc_target_.insert(arc_target_.end(), arc_target.begin(), arc_target.end());
  arc_cost_.insert(arc_cost_.end(), arc_cost.begin(), arc_cost.end());
  flow_.resize(arc_source_.size(), 0.0);
  state_.resize(arc_source_.size(), kLower);
  arc_num_ = static_cast<std::int64_t>(arc_source_.size()) - node_num_;
  const double sqrt_arcs = std::sqrt(static_cast<double>(std::max<std::int64_t>(arc_num_, 1)));
  block_size_ = std::max<std::int64_t>(static_cast<std::int64_t>(sqrt_arcs), 10);
}

double NetworkSimplex::artificial_flow() const {
  double m = 0.0;
  for (std::int32_t u = 0; u < node_num_; ++u) m = std::max(m, flow_[u]);
  return m;
}

void NetworkSimplex::init_tree() {
  parent_[root_] = -1;
  pred_[root_] = -1;
  thread_[root_] = 0;
  rev_thread_[0] = root_;
  succ_num_[root_] = node_num_ + 1;
  last_succ_[root_] = root_ - 1;
  pi_[root_] = 0.0;
  for (std::int32_t u = 0; u < node_num_; ++u) {
    const std::int64_t e = u;
    parent_[u] = root_;
    pred_[u] = e;
    thread_[u] = u + 1;
    rev_thread_[u + 1] = u;
    succ_num_[u] = 1;
    last_succ_[u] = u;
    state_[e] = kTree;
    if (supply_[u] >= 0.0) {
      pred_dir_[u] = kDirUp;
      pi_[u] = 0.0;
      arc_source_[u] = u;
      arc_target_[u] = root_;
      flow_[e] = supply_[u];
      arc_cost_[u] = 0.0;
    } else {
      pred_dir_[u] = kDirDown;
      pi_[u] = art_cost_value_;
      arc_source_[u] = root_;
      arc_target_[u] = u;
      flow_[e] = -supply_[u];
      arc_cost_[u] = art_cost_value_;
    }
  }
}

bool NetworkSimplex::find_entering_arc() {
  // Artificial arcs [0, node_num_) are never priced.
  const std::int64_t first = node_num_;
  const std::int64_t end = node_num_ + arc_num_;
  if (next_arc_ < first || next_arc_ >= end) next_arc_ = first;
  double best = 0.0;
  std::int64_t cnt = block_size_;
  std::int64_t e = next_arc_;
  const auto scan = [&](std::int64_t arc) {
    const double c = state_[arc] * (arc_cost_[arc] + pi_[arc_source_[arc]] - pi_[arc_target_[arc]]);
    if (c < best) {
      best = c;
      in_arc_ = arc;
    }
  };
  for (; e < end; ++e) {
    scan(e);
    if (--cnt == 0) {
      if (best < -rc_tol_) {
        next_arc_ = e;
        return true;
      }
      cnt = block_size_;
    }
  }
  for (e = first; e < next_arc_; ++e) {
    scan(e);
    if (--cnt == 0) {
      if (best < -rc_tol_) {
        next_arc_ = e;
        return true;
      }
      cnt = block_size_;
    }
  }
  if (best < -rc_tol_) {
    next_arc_ = e;
    return true;
  }
  return false;
}

void NetworkSimplex::find_join_node() {
  std::int32_t u = source_of(in_arc_);
  std::int32_t v = target_of(in_arc_);
  while (u != v) {
    if (succ_num_[u] < succ_num_[v]) {
      u = parent_[u];
    } else {
      v = parent_[v];
    }
  }
  join_ = u;
}

bool NetworkSimplex::find_leaving_arc() {
  std::int32_t first, second;
  if (state_[in_arc_] == kLower) {
    first = source_of(in_arc_);
    second = target_of(in_arc_);
  } else {
    first = target_of(in_arc_);
    second = source_of(in_arc_);
  }
  delta_ = std::numeric_limits<double>::infinity();
  int result = 0;
  for (std::int32_t u = first; u != join_; u = parent_[u]) {
    if (pred_dir_[u] == kDirUp) {
      const double d = flow_[pred_[u]];
      if (d < delta_) {
        delta_ = d;
        u_out_ = u;
        result = 1;
      }
    }
  }
  for (std::int32_t u = second; u != join_; u = parent_[u]) {
    if (pred_dir_[u] == kDirDown) {
      const double d = flow_[pred_[u]];
      if (d <= delta_) {
        delta_ = d;
        u_out_ = u;
        result = 2;
      }
    }
  }
  if (result == 0) return false;
  if (result == 1) {
    u_in_ = first;
    v_in_ = second;
  } else {
    u_in_ = second;
    v_in_ = first;
  }
  return true;
}

void NetworkSimplex::change_flow() {
  if (delta_ > 0.0) {
    const double val = state_[in_arc_] * delta_;
    flow_[in_arc_] += val;
    for (std::int32_t u = source_of(in_arc_); u != join_; u = parent_[u]) {
      flow_[pred_[u]] -= pred_dir_[u] * val;
    }
    for (std::int32_t u = target_of(in_arc_); u != join_; u = parent_[u]) {
      flow_[pred_[u]] += pred_dir_[u] * val;
    }
  }
  state_[in_arc_] = kTree;
  const std::int64_t out = pred_[u_out_];
  // The leaving arc is drained to exactly zero by construction. Clamp
  // rounding residue on the rest of the cycle.
  flow_[out] = 0.0;
  state_[out] = kLower;
}

void NetworkSimplex::update_tree_structure() {
  const std::int32_t old_rev_thread = rev_thread_[u_out_];
  const std::int32_t old_succ_num = succ_num_[u_out_];
  const std::int32_t old_last_succ = last_succ_[u_out_];
  v_out_ = parent_[u_out_];

  if (u_in_ == u_out_) {
    parent_[u_in_] = v_in_;
    pred_[u_in_] = in_arc_;
    pred_dir_[u_in_] = u_in_ == source_of(in_arc_) ? kDirUp : kDirDown;

    if (thread_[v_in_] != u_out_) {
      std::int32_t after = thread_[old_last_succ];
      thread_[old_rev_thread] = after;
      rev_thread_[after] = old_rev_thread;
      after = thread_[v_in_];
      thread_[v_in_] = u_out_;
      rev_thread_[u_out_] = v_in_;
      thread_[old_last_succ] = after;
      rev_thread_[after] = old_last_succ;
    }
  } else {
    // When old_rev_thread == v_in, join and v_out coincide.
    const std::int32_t thread_continue = old_rev_thread == v_in_ ? thread_[old_last_succ] : thread_[v_in_];

    // Re-hang the stem (u_in ... u_out) under v_in, reversing parent links.
    std::int32_t stem = u_in_;
    std::int32_t par_stem = v_in_;
    std::int32_t next_stem;
    std::int32_t last = last_succ_[u_in_];
    std::int32_t before;
    std::int32_t after = thread_[last];
    thread_[v_in_] = u_in_;
    dirty_revs_.clear();
    dirty_revs_.push_back(v_in_);
    while (stem != u_out_) {
      next_stem = parent_[stem];
      thread_[last] = next_stem;
      dirty_revs_.push_back(last);

      before = rev_thread_[stem];
      thread_[before] = after;
      rev_thread_[after] = before;

      parent_[stem] = par_stem;
      par_stem = stem;
      stem = next_stem;

      last = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem] : last_succ_[stem];
      after = thread_[last];
    }
    parent_[u_out_] = par_stem;
    thread_[last] = thread_continue;
    rev_thread_[thread_continue] = last;
    last_succ_[u_out_] = last;

    if (old_rev_thread != v_in_) {
      thread_[old_rev_thread] = after;
      rev_thread_[after] = old_rev_thread;
    }

    for (std::int32_t u : dirty_revs_) rev_thread_[thread_[u]] = u;

    std::int32_t tmp_sc = 0;
    const std::int32_t tmp_ls = last_succ_[u_out_];
    for (std::int32_t u = u_out_, p = parent_[u]; u != u_in_; u = p, p = parent_[u]) {
      pred_[u] = pred_[p];
      pred_dir_[u] = static_cast<std::int8_t>(-pred_dir_[p]);
      tmp_sc += succ_num_[u] - succ_num_[p];
      succ_num_[u] = tmp_sc;
      last_succ_[p] = tmp_ls;
    }
    pred_[u_in_] = in_arc_;
    pred_dir_[u_in_] = u_in_ == source_of(in_arc_) ? kDirUp : kDirDown;
    succ_num_[u_in_] = old_succ_num;
  }

  const std::int32_t up_limit_out = last_succ_[join_] == v_in_ ? join_ : -1;
  const std::int32_t last_succ_out = last_succ_[u_out_];
  for (std::int32_t u = v_in_; u != -1 && last_succ_[u] == v_in_; u = parent_[u]) {
    last_succ_[u] = last_succ_out;
  }

  if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
    for (std::int32_t u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
      last_succ_[u] = old_rev_thread;
    }
  } else if (last_succ_out != old_last_succ) {
    for (std::int32_t u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
      last_succ_[u] = last_succ_out;
    }
  }

  for (std::int32_t u = v_in_; u != join_; u = parent_[u]) succ_num_[u] += old_succ_num;
  for (std::int32_t u = v_out_; u != join_; u = parent_[u]) succ_num_[u] -= old_succ_num;
}

void NetworkSimplex::update_potential() {
  const double sigma = pi_[v_in_] - pi_[u_in_] - pred_dir_[u_in_] * cost_of(in_arc_);
  const std::int32_t end = thread_[last_succ_[u_in_]];
  for (std::int32_t u = u_in_; u != end; u = thread_[u]) pi_[u] += sigma;
}

NetworkSimplex::Status NetworkSimplex::run(std::int64_t max_pivots) {
  if (!initialised_) {
    init_tree();
    initialised_ = true;
  }
  if (arc_num_ == 0) return artificial_flow() > 1e-12 ? Status::Infeasible : Status::Optimal;
  while (find_entering_arc()) {
    if (pivots_ >= max_pivots) return Status::PivotLimit;
    find_join_node();
    if (!find_leaving_arc()) return Status::Infeasible;  // unbounded cycle; cannot happen with costs >= 0
    change_flow();
    update_tree_structure();
    update_potential();
    ++pivots_;
  }
  return Status::Optimal;
}

}  // namespace wproj::detail
