#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sfdde {

/// Number of dt steps in x; throws GridMisaligned unless x is a grid multiple.
int grid_multiple(double x, double dt, const char* what);

/// Uniform grid on [start - r, T] with nodes start - r + i*dt. Node times are
/// computed from absolute step counts, so grids with different start values
/// produce bit-identical times at shared nodes.
class TimeGrid {
 public:
  TimeGrid(double delay, double horizon, double dt, double start = 0.0);

  double delay() const { return delay_; }
  double horizon() const { return horizon_; }
  double dt() const { return dt_; }
  double start() const { return start_; }

  /// r / dt
  int window() const { return window_; }
  /// (T - start) / dt
  int steps() const { return steps_; }
  /// Absolute index of the first step, start / dt.
  int start_step() const { return start_step_; }
  int node_count() const { return window_ + steps_ + 1; }
  /// Node index of time `start`.
  int start_node() const { return window_; }

  double time(int node) const;
  /// Time of absolute step s (the left node of cell s), s * dt.
  double step_time(long s) const { return static_cast<double>(s) * dt_; }
  /// Node index of a grid-aligned time; throws GridMisaligned.
  int node_of(double t) const;

  bool operator==(const TimeGrid& other) const = default;

 private:
  double delay_;
  double horizon_;
  double dt_;
  double start_;
  int window_ = 0;
  int steps_ = 0;
  int start_step_ = 0;
};

/// Read-only view of X(t + theta), theta in [-r, 0], over a column-major
/// d x N value array. Offsets are in grid steps: k = -window .. 0.
class Segment {
 public:
  Segment(const Eigen::MatrixXd& values, int anchor, int window, double dt);

  int dim() const { return static_cast<int>(values_->rows()); }
  int window() const { return window_; }
  double dt() const { return dt_; }
  double delay() const { return window_ * dt_; }
  int anchor() const { return anchor_; }

  /// Value at theta = k * dt.
  auto at_step(int k) const { return values_->col(anchor_ + k); }
  auto present() const { return values_->col(anchor_); }
  /// Value at a grid-aligned theta in [-r, 0]; throws OffsetOutOfRange / AtomOffGrid.
  Eigen::VectorXd at(double theta) const;
  /// Step offset of theta; throws OffsetOutOfRange / AtomOffGrid.
  int offset_of(double theta) const;

 private:
  const Eigen::MatrixXd* values_;
  int anchor_;
  int window_;
  double dt_;
};

/// A standalone segment (initial data, restart state, backward extensions).
struct SegmentBuffer {
  Eigen::MatrixXd values;  // d x (window + 1), column window is theta = 0
  double dt = 0.0;

  SegmentBuffer() = default;
  SegmentBuffer(Eigen::MatrixXd v, double step) : values(std::move(v)), dt(step) {}
  int window() const { return static_cast<int>(values.cols()) - 1; }
  Segment view() const { return Segment(values, window(), window(), dt); }

  static SegmentBuffer constant(const Eigen::VectorXd& value, double delay, double dt);
  /// Samples fn(theta) at the nodes of [-r, 0].
  template <class Fn>
  static SegmentBuffer sample(int dim, double delay, double dt, Fn&& fn);
  static SegmentBuffer copy_of(const Segment& seg);
};

/// The (L^p part, present value) pair.
struct MpSegment {
  Segment segment;
  double p = 2.0;
};

/// A jump applied inside cell (t_i, t_{i+1}]; `cell` is the absolute step index.
struct JumpRecord {
  long cell = 0;
  double time = 0.0;
  int component = 0;
  double mark = 0.0;
  Eigen::VectorXd pre;
  Eigen::VectorXd post;
};

/// Discretized cadlag path on a TimeGrid with step interpolation from the left node.
class CadlagPath {
 public:
  CadlagPath(TimeGrid grid, int dim);

  const TimeGrid& grid() const { return grid_; }
  int dim() const { return static_cast<int>(values_.rows()); }
  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::MatrixXd& values() { return values_; }
  auto value(int node) const { return values_.col(node); }
  auto value(int node) { return values_.col(node); }

  /// X(t) for t in [start - r, T], piecewise constant from the left node.
  Eigen::VectorXd at(double t) const;
  /// X_t for a grid node t >= start.
  Segment segment(int node) const { return Segment(values_, node, grid_.window(), grid_.dt()); }
  Segment segment_at(double t) const { return segment(grid_.node_of(t)); }

  std::vector<JumpRecord>& jump_log() { return jump_log_; }
  const std::vector<JumpRecord>& jump_log() const { return jump_log_; }
  bool has_jump_log() const { return has_jump_log_; }
  void set_has_jump_log(bool on) { has_jump_log_ = on; }

  /// True when a jump landed in the cell ending at `node`.
  std::vector<bool> jump_nodes() const;

 private:
  TimeGrid grid_;
  Eigen::MatrixXd values_;
  std::vector<JumpRecord> jump_log_;
  bool has_jump_log_ = false;
};

/// Max Euclidean norm over the window nodes.
double sup_norm(const Segment& seg);
/// Max Euclidean norm of the path over nodes [first, last].
double sup_norm(const CadlagPath& path, int first_node, int last_node);

/// (dt * sum_{k=-W}^{-1} |eta(k dt)|^p + |present|^p)^{1/p}
double mp_norm(const MpSegment& seg);

/// (||(eta, eta(0))||_{M^p}^p, (r + 1) ||eta||_sup^p); the first never exceeds the second.
std::pair<double, double> embedding_gap(const Segment& seg, double p);

struct ContinuityPoint {
  double t = 0.0;
  double increment = 0.0;
};

/// M^p distance between consecutive segments (X_t, X(t)) and (X_{t+dt}, X(t+dt))
/// for every node t in [start, T - dt].
std::vector<ContinuityPoint> segment_continuity_profile(const CadlagPath& path, double p);

/// CSV with header t,x1..xd,is_jump at grid resolution.
void write_path_csv(std::ostream& out, const CadlagPath& path);

/// Round-trippable scientific formatting used by every CSV writer.
std::string format_number(double x);

template <class Fn>
SegmentBuffer SegmentBuffer::sample(int dim, double delay, double dt, Fn&& fn) {
  const int window = grid_multiple(delay, dt, "delay");
  SegmentBuffer out(Eigen::MatrixXd(dim, window + 1), dt);
  for (int k = 0; k <= window; ++k) {
    out.values.col(k) = fn(static_cast<double>(k - window) * dt);
  }
  return out;
}

}  // namespace sfdde
