// Copyright 2026 The ldpcb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Local privacy noise primitives: Laplace vectors, Wishart matrices built from
// Gaussian outer products, and closed-form Laplace privacy certificates.

#include <Eigen/Core>

#include "ldpcb/rng.hpp"

namespace ldpcb {

// Per-sample local privacy parameter. The update step splits it evenly over
// three channels (count, moment vector, second-moment matrix); the
// confidence-interval step spends it on a single channel.
struct PrivacyBudget {
  double alpha = 1.0;

  void validate() const;  // throws std::invalid_argument unless 0 < alpha <= 1
  double update_channel() const { return alpha / 3.0; }
  double ci_channel() const { return alpha; }
};

enum class NoiseKind { kLaplaceScalar, kLaplaceVector, kWishart };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kLaplaceScalar;
  int dim = 1;
  int degrees = 0;  // Wishart only; always dim + 1 for the oracle.
  double scale = 1.0;

  void validate() const;
};

// i.i.d. Laplace(0, scale) components.
Eigen::VectorXd sample_laplace(int dim, double scale, Rng& rng);

// W_dim(degrees, V) as a sum of `degrees` outer products of N(0, V) vectors.
Eigen::MatrixXd sample_wishart(int dim, int degrees, const Eigen::MatrixXd& scale_matrix,
                               Rng& rng);

// magnitude * (W - 1.5 (d+1) / alpha * I), W ~ W_d(d+1, 1.5 / alpha * I).
Eigen::MatrixXd centered_wishart_noise(int d, const PrivacyBudget& budget, double magnitude,
                                       Rng& rng);

struct RatioCertificate {
  bool ok = false;
  double worst_ratio = 0.0;  // sup over inputs and outputs of the density ratio
  double target_ratio = 0.0;
};

// Worst-case Laplace density ratio for a mechanism with the given scale and
// l1 sensitivity, evaluated on a grid of shifted inputs. The supremum is
// exp(sensitivity / scale); `ok` iff it does not exceed exp(alpha_target).
RatioCertificate verify_density_ratio(double scale, double sensitivity, double alpha_target);

// Per-sample noise magnitudes of the update step for a bin in shell k.
struct UpdateScales {
  double count;    // Laplace scale on c
  double moment;   // Laplace scale on each lambda component
  double wishart;  // multiplier on (sum_j g_j g_j^T - (d+1) I), g_j ~ N(0, I)
};

UpdateScales update_scales(int d, double gamma, int k, double alpha);

// Laplace scale on the confidence-interval accumulator of a fitted bin.
double ci_scale(double gamma, int k, double s_hat, double alpha);

}  // namespace ldpcb
