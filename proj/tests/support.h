#ifndef LEGMPC_TESTS_SUPPORT_H_
#define LEGMPC_TESTS_SUPPORT_H_

// Oracles shared by the unit tests and the acceptance runner.

#include <cstdint>
#include <string>

#include "legmpc/experiments.h"

namespace legmpc::check {

// Small architecture for exhaustive checks. All layer widths are <= 8 unless
// state_dim is larger.
Architecture tiny_arch(ModelVariant v, int state_dim = 5);

// A model with random weights and random (non-identity) normalization.
DynModel random_model(const Architecture& arch, std::uint64_t seed);

// Random raw batch matching arch.column_dim().
Batch random_batch(const Architecture& arch, int n, std::uint64_t seed);

struct GradCheck {
  double max_rel = 0.0;  // |g - fd| / max(|g|, |fd|, floor)
  double max_abs = 0.0;
};

// Loss evaluated with plain loops in long double, independent of the library's
// Eigen forward pass. The extra precision keeps finite differences from being
// dominated by rounding in the loss itself.
long double reference_loss(const DynModel& model, const Batch& batch);

// Analytic gradient vs central differences of reference_loss with step h on
// every parameter.
GradCheck gradient_check(const DynModel& model, const Batch& batch, double h = 1e-5);

struct ArgminTrial {
  bool match = false;
  int expected = -1;
  int serial = -1;
  int parallel = -1;
  int candidates = 0;
};

// One random injected candidate set (<= 3^horizon sequences drawn from a
// three-level grid, duplicates included) scored by plan() under both
// policies and by a brute-force loop over evaluate_sequence.
ArgminTrial argmin_trial(std::uint64_t seed);

// Tiny random 24-dim model usable by the planner.
DynModel random_planner_model(std::uint64_t seed, ModelVariant v = ModelVariant::kPlain);

StateVector random_state(Rng& rng);

std::string temp_path(const std::string& name);

// The default config shrunk for fast tests: few rollouts, tiny networks,
// short evaluations and few candidates.
nlohmann::json small_config_json();
Config small_config();

}  // namespace legmpc::check

#endif  // LEGMPC_TESTS_SUPPORT_H_
