#pragma once

#include <cstdint>
#include <vector>

namespace wproj::detail {

/// Primal network simplex for a balanced, uncapacitated transportation
/// problem on an explicit arc list.
///
/// Nodes [0, n_src) carry supplies, nodes [n_src, n_src + n_dst) carry
/// demands. Arc e goes from source_[e] (a supply node) to target_[e] (a
/// demand node). The initial basis is the artificial-root star; artificial
/// arcs are never priced. Pivoting uses block search and the strongly
/// feasible tree leaving rule, so the run is deterministic and cannot cycle.
class NetworkSimplex {
 public:
  enum class Status { Optimal, Infeasible, PivotLimit };

  /// `cost_bound` caps the costs of arcs added later; the largest initial
  /// cost is used when it is smaller.
  NetworkSimplex(std::vector<double> supply, std::vector<double> demand, const std::vector<std::int32_t>& arc_source,
                 const std::vector<std::int32_t>& arc_target, const std::vector<double>& arc_cost,
                 double cost_bound = 0.0);

  /// Appends arcs at zero flow. The current basis stays feasible, so the
  /// next run() continues from it.
  void add_arcs(const std::vector<std::int32_t>& arc_source, const std::vector<std::int32_t>& arc_target,
                const std::vector<double>& arc_cost);

  /// Pivots to optimality; later calls resume from the current basis.
  Status run(std::int64_t max_pivots = INT64_MAX);

  /// Real arcs are numbered in insertion order from 0.
  std::int64_t arc_count() const { return arc_num_; }
  double flow(std::int64_t arc) const { return flow_[node_num_ + arc]; }
  /// Dual potential; reduced cost of arc s->t is cost + pi[s] - pi[t].
  double potential(std::int32_t node) const { return pi_[node]; }
  /// Largest flow left on any artificial arc.
  double artificial_flow() const;
  std::int64_t pivots() const { return pivots_; }
  double reduced_cost_tolerance() const { return rc_tol_; }

 private:
  static constexpr std::int8_t kUpper = -1;
  static constexpr std::int8_t kTree = 0;
  static constexpr std::int8_t kLower = 1;
  static constexpr std::int8_t kDirUp = 1;
  static constexpr std::int8_t kDirDown = -1;

  void init_tree();
  bool find_entering_arc();
  void find_join_node();
  bool find_leaving_arc();
  void change_flow();
  void update_tree_structure();
  void update_potential();

  std::int32_t source_of(std::int64_t e) const { return arc_source_[e]; }
  std::int32_t target_of(std::int64_t e) const { return arc_target_[e]; }
  double cost_of(std::int64_t e) const { return arc_cost_[e]; }

  std::int32_t n_src_;
  std::int32_t node_num_;  // real nodes; the root has index node_num_
  std::int64_t arc_num_ = 0;  // real arcs
  std::int32_t root_;

  std::vector<double> supply_;
  // Arc u < node_num_ is the artificial arc of node u; real arc k has
  // index node_num_ + k.
  std::vector<std::int32_t> arc_source_;
  std::vector<std::int32_t> arc_target_;
  std::vector<double> arc_cost_;

  std::vector<double> flow_;
  std::vector<std::int8_t> state_;

  std::vector<std::int32_t> parent_;
  std::vector<std::int64_t> pred_;
  std::vector<std::int32_t> thread_;
  std::vector<std::int32_t> rev_thread_;
  std::vector<std::int32_t> succ_num_;
  std::vector<std::int32_t> last_succ_;
  std::vector<std::int8_t> pred_dir_;
  std::vector<double> pi_;
  std::vector<std::int32_t> dirty_revs_;

  double max_arc_cost_ = 0.0;
  double art_cost_value_ = 0.0;
  double rc_tol_ = 0.0;
  std::int64_t block_size_ = 0;
  std::int64_t next_arc_ = 0;
  std::int64_t pivots_ = 0;
  bool initialised_ = false;

  // Current pivot.
  std::int64_t in_arc_ = -1;
  std::int32_t join_ = -1;
  std::int32_t u_in_ = -1, v_in_ = -1, u_out_ = -1, v_out_ = -1;
  double delta_ = 0.0;
};

}  // namespace wproj::detail
