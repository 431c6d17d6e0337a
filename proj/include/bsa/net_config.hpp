#pragma once

#include <vector>

namespace bsa {

// Architecture and training hyperparameters of the betting-score network:
// an MLP with ReLU activations, layer normalization after each hidden
// pre-activation, dropout on hidden activations (training only), and a
// c * q * tanh output head that enforces |phi| <= q < 1/2.
struct NetConfig {
    int input_dim = 1;
    std::vector<int> hidden_widths = {32, 32};
    double dropout_rate = 0.1;
    double output_bound = 0.45;  // q, must stay strictly below 1/2
    double learning_rate = 5e-4;
    int max_epochs = 100;
    int patience = 5;
    double holdout_fraction = 0.2;
};

// Throws InvalidSpecError / OutOfRangeError on bad fields.
void validate(const NetConfig& cfg);

}  // namespace bsa
