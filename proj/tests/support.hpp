#pragma once

// Shared test helpers: finite-difference oracles, miniature models and
// small fixtures.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dwrpm/data.hpp"
#include "dwrpm/model.hpp"
#include "dwrpm/rng.hpp"
#include "dwrpm/tensor.hpp"

namespace dwrpm::testing {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdTolerance = 1e-4;

/// |a - n| relative to the larger magnitude, with an absolute floor so that
/// gradients which are zero analytically do not divide by noise.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradReport {
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;

  void record(double err, const std::string& name, std::size_t i) {
    ++checked;
    if (err > worst) {
      worst = err;
      where = name + "[" + std::to_string(i) + "]";
    }
  }
};

/// Central differences of `loss` with respect to every element of `t`,
/// compared against `analytic`.
inline void check_tensor(Tensor& t, const Tensor& analytic, const std::function<double()>& loss,
                         const std::string& name, GradReport& report, double h = kFdStep) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double saved = t[i];
    t[i] = saved + h;
    const double up = loss();
    t[i] = saved - h;
    const double down = loss();
    t[i] = saved;
    report.record(relative_error(analytic[i], (up - down) / (2.0 * h)), name, i);
  }
}

/// sum(w * y) over a projection with fixed random weights, so every output
/// contributes a distinct gradient.
inline double weighted_sum(const Tensor& y, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
  return s;
}

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (double& v : t.data()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

/// Analytic model gradients against central differences over every entry of
/// every parameter, for the loss sum(w * model(x, coords)).
inline GradReport check_model_gradients(ModelGraph& model, const Tensor& x, const Tensor& coords,
                                        const Tensor& w) {
  const ForwardResult fwd = model.forward(x, coords, Mode::inference, nullptr);
  const std::vector<Tensor> grads = model.backward(fwd.tape, w);
  GradReport report;
  auto params = model.parameters();
  const auto loss = [&] { return weighted_sum(model.predict(x, coords), w); };
  for (std::size_t p = 0; p < params.size(); ++p)
    check_tensor(*params[p].tensor, grads[p], loss, params[p].name, report);
  return report;
}

struct Miniature {
  Architecture arch;
  std::size_t seq_len;
  ArchitectureOptions options;
};

/// Small, dropout-free versions of the four architectures.
inline std::vector<Miniature> miniatures() {
  ArchitectureOptions base;
  base.dropout = 0.0;
  base.kernel_len = 3;
  base.filters = 3;
  base.lstm_units = 4;
  base.pool_window = 2;

  ArchitectureOptions dw = base;
  dw.hidden = {4, 3};
  dw.filters = 2;
  ArchitectureOptions mlp = base;
  mlp.hidden = {6, 5, 4};
  return {{Architecture::dwrpm, 8, dw},
          {Architecture::mlp, 10, mlp},
          {Architecture::cnn, 16, base},
          {Architecture::lstm, 8, base}};
}

/// Inputs in the ranges the model sees: normalized rainfall and raw degrees.
inline Tensor random_sequences(std::size_t batch, std::size_t seq_len, Rng& rng) {
  return random_tensor({batch, seq_len}, rng, 0.0, 10.0);
}
inline Tensor random_coords(std::size_t batch, Rng& rng) {
  Tensor c({batch, 2});
  for (std::size_t i = 0; i < batch; ++i) {
    c.at(i, 0) = kMinLatitude + (kMaxLatitude - kMinLatitude) * rng.uniform();
    c.at(i, 1) = kMinLongitude + (kMaxLongitude - kMinLongitude) * rng.uniform();
  }
  return c;
}

inline Station make_station(const std::string& id, Zone zone, double lat = 26.0, double lon = 74.0) {
  return Station{id, id + " gauge", "Ajmer", zone, lat, lon};
}

inline RainSeries constant_series(const std::string& id, Date start, std::size_t days, double mm) {
  RainSeries s{id, start, {}};
  s.values.assign(days, mm);
  return s;
}

/// A fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dwrpm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dwrpm::testing
