#include "sfdde/paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "sfdde/error.hpp"

namespace sfdde {

int grid_multiple(double x, double dt, const char* what) {
  if (!(dt > 0.0) || !std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "grid step must be positive");
  const double ratio = x / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, std::abs(ratio))) {
    std::ostringstream msg;
    msg << what << " = " << x << " is not a multiple of dt = " << dt;
    throw Error(ErrorCode::GridMisaligned, msg.str());
  }
  return static_cast<int>(rounded);
}

TimeGrid::TimeGrid(double delay, double horizon, double dt, double start)
    : delay_(delay), horizon_(horizon), dt_(dt), start_(start) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  if (!(delay >= 0.0)) throw Error(ErrorCode::InvalidArgument, "delay must be nonnegative");
  if (!(horizon >= start) || !(start >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "grid needs 0 <= start <= T");
  }
  window_ = grid_multiple(delay, dt, "r");
  start_step_ = grid_multiple(start, dt, "start");
  steps_ = grid_multiple(horizon, dt, "T") - start_step_;
}

double TimeGrid::time(int node) const {
  return static_cast<double>(start_step_ + node - window_) * dt_;
}

int TimeGrid::node_of(double t) const {
  const int node = grid_multiple(t, dt_, "t") - start_step_ + window_;
  if (node < 0 || node >= node_count()) {
    std::ostringstream msg;
    msg << "t = " << t << " lies outside [" << time(0) << ", " << horizon_ << "]";
    throw Error(ErrorCode::GridMisaligned, msg.str());
  }
  return node;
}

Segment::Segment(const Eigen::MatrixXd& values, int anchor, int window, double dt)
    : values_(&values), anchor_(anchor), window_(window), dt_(dt) {
  if (anchor - window < 0 || anchor >= values.cols()) {
    throw Error(ErrorCode::OffsetOutOfRange, "segment window leaves the stored path");
  }
}

int Segment::offset_of(double theta) const {
  if (theta > 0.0 || theta < -delay() - 1e-12 * std::max(1.0, delay())) {
    std::ostringstream msg;
    msg << "offset " << theta << " outside [-" << delay() << ", 0]";
    throw Error(ErrorCode::OffsetOutOfRange, msg.str());
  }
  try {
    return grid_multiple(theta, dt_, "offset");
  } catch (const Error& e) {
    throw Error(ErrorCode::AtomOffGrid, e.what());
  }
}

Eigen::VectorXd Segment::at(double theta) const { return at_step(offset_of(theta)); }

SegmentBuffer SegmentBuffer::constant(const Eigen::VectorXd& value, double delay, double dt) {
  const int window = grid_multiple(delay, dt, "delay");
  return SegmentBuffer(value.replicate(1, window + 1), dt);
}

SegmentBuffer SegmentBuffer::copy_of(const Segment& seg) {
  Eigen::MatrixXd v(seg.dim(), seg.window() + 1);
  for (int k = -seg.window(); k <= 0; ++k) v.col(k + seg.window()) = seg.at_step(k);
  return SegmentBuffer(std::move(v), seg.dt());
}

CadlagPath::CadlagPath(TimeGrid grid, int dim)
    : grid_(std::move(grid)), values_(Eigen::MatrixXd::Zero(dim, grid_.node_count())) {
  if (dim <= 0) throw Error(ErrorCode::DimensionMismatch, "path dimension must be positive");
}

Eigen::VectorXd CadlagPath::at(double t) const {
  const double first = grid_.time(0);
  if (t < first || t > grid_.horizon()) throw Error(ErrorCode::OffsetOutOfRange, "time outside the path grid");
  int node = static_cast<int>(std::floor((t - first) / grid_.dt() + 1e-9));
  node = std::clamp(node, 0, grid_.node_count() - 1);
  return values_.col(node);
}

std::vector<bool> CadlagPath::jump_nodes() const {
  std::vector<bool> out(static_cast<std::size_t>(grid_.node_count()), false);
  for (const auto& j : jump_log_) {
    const long node = j.cell - grid_.start_step() + grid_.window() + 1;
    if (node >= 0 && node < grid_.node_count()) out[static_cast<std::size_t>(node)] = true;
  }
  return out;
}

double sup_norm(const Segment& seg) {
  double m = 0.0;
  for (int k = -seg.window(); k <= 0; ++k) m = std::max(m, seg.at_step(k).norm());
  return m;
}

double sup_norm(const CadlagPath& path, int first_node, int last_node) {
  double m = 0.0;
  for (int i = first_node; i <= last_node; ++i) m = std::max(m, path.value(i).norm());
  return m;
}

double mp_norm(const MpSegment& mp) {
  const Segment& seg = mp.segment;
  double lp = 0.0;
  for (int k = -seg.window(); k < 0; ++k) lp += std::pow(seg.at_step(k).norm(), mp.p);
  return std::pow(lp * seg.dt() + std::pow(seg.present().norm(), mp.p), 1.0 / mp.p);
}

std::pair<double, double> embedding_gap(const Segment& seg, double p) {
  const double lhs = std::pow(mp_norm({seg, p}), p);
  const double rhs = (seg.delay() + 1.0) * std::pow(sup_norm(seg), p);
  return {lhs, rhs};
}

std::vector<ContinuityPoint> segment_continuity_profile(const CadlagPath& path, double p) {
  const TimeGrid& grid = path.grid();
  std::vector<ContinuityPoint> out;
  out.reserve(static_cast<std::size_t>(grid.steps()));
  const int w = grid.window();
  for (int node = grid.start_node(); node + 1 < grid.node_count(); ++node) {
    double lp = 0.0;
    for (int k = -w; k < 0; ++k) lp += std::pow((path.value(node + 1 + k) - path.value(node + k)).norm(), p);
    const double present = std::pow((path.value(node + 1) - path.value(node)).norm(), p);
    out.push_back({grid.time(node), std::pow(lp * grid.dt() + present, 1.0 / p)});
  }
  return out;
}

std::string format_number(double x) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.16e", x);
  return buffer;
}

void write_path_csv(std::ostream& out, const CadlagPath& path) {
  out << "t";
  for (int c = 0; c < path.dim(); ++c) out << ",x" << (c + 1);
  out << ",is_jump\n";
  const auto jumps = path.jump_nodes();
  for (int i = 0; i < path.grid().node_count(); ++i) {
    out << format_number(path.grid().time(i));
    for (int c = 0; c < path.dim(); ++c) out << ',' << format_number(path.value(i)[c]);
    out << ',' << (jumps[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
  }
}

}  // namespace sfdde
