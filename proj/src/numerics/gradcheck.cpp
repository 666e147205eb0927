#include "cmivtp/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cmivtp/error.hpp"

namespace cmivtp::num {

namespace {
thread_local BranchTrace* g_trace = nullptr;
}

BranchTrace::BranchTrace() : previous_(g_trace) { g_trace = this; }
BranchTrace::~BranchTrace() { g_trace = previous_; }

bool BranchTrace::active() { return g_trace != nullptr; }

void BranchTrace::note(std::uint64_t value) {
  if (g_trace) g_trace->hash_ = splitmix64(g_trace->hash_ ^ value);
}

GradCheckReport check_gradients(const std::function<Tensor()>& f, std::vector<Tensor> params,
                                double h, std::size_t max_coords_per_param, Rng* pick) {
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    for (auto& p : params) {
      if (!p.requires_grad()) throw Error("check_gradients: parameter does not require grad");
      p.zero_grad();
    }
    Tensor loss = f();
    if (loss.size() != 1) throw DimensionError("check_gradients: f must be scalar, got " + shape_str(loss.shape()));
    loss.backward();
    for (auto& p : params) {
      auto g = p.grad();
      analytic.emplace_back(g.begin(), g.end());
      analytic.back().resize(p.size(), 0.0);
      p.zero_grad();
    }
  }

  NoGradScope no_grad;
  BranchTrace trace;
  auto eval = [&] {
    trace.reset();
    return f().item();
  };
  const double base1 = eval();
  const std::uint64_t base_sig = trace.signature();
  const double base2 = eval();
  if (!(base1 == base2) && !(std::isnan(base1) && std::isnan(base2))) {
    throw NumericError("check_gradients: f is not deterministic (" + std::to_string(base1) + " vs " +
                       std::to_string(base2) + ")");
  }
  const double floor = gradient_floor(base1);

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto w = params[pi].mutable_data();
    std::vector<std::size_t> coords(w.size());
    std::iota(coords.begin(), coords.end(), 0);
    const std::size_t want = max_coords_per_param > 0 ? std::min(max_coords_per_param, coords.size()) : coords.size();
    if (want < coords.size() && pick) pick->shuffle(coords);
    std::size_t done = 0;
    for (std::size_t i : coords) {
      if (done == want) break;
      const double orig = w[i];
      w[i] = orig + h;
      const double fp = eval();
      const bool same_p = trace.signature() == base_sig;
      w[i] = orig - h;
      const double fm = eval();
      const bool same_m = trace.signature() == base_sig;
      w[i] = orig;
      if (!same_p || !same_m) {
        ++report.skipped_kinks;
        continue;
      }
      ++done;
      const double numeric = (fp - fm) / (2.0 * h);
      const double err = relative_error(analytic[pi][i], numeric, floor);
      ++report.coordinates;
      if (err > report.max_rel_error || std::isnan(err)) {
        report.max_rel_error = err;
        report.worst_param = pi;
        report.worst_index = i;
        report.worst_analytic = analytic[pi][i];
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h) {
  if (!x.requires_grad()) x.set_requires_grad(true);
  return check_gradients([&] { return f(x); }, {x}, h).max_rel_error;
}

}  // namespace cmivtp::num
