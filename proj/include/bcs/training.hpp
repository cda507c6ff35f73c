#pragma once

#include <iomanip>
#include <limits>
#include <ostream>
#include <vector>

#include "bcs/data.hpp"
#include "bcs/errors.hpp"
#include "bcs/model.hpp"
#include "bcs/nn/optim.hpp"
#include "bcs/rng.hpp"
#include "bcs/sensing.hpp"

namespace bcs {

struct TrainConfig {
    int batch_size = 128;
    double initial_lr = 0.0002;
    double plateau_factor = 0.5;
    int plateau_patience = 5;
    int max_epochs = 200;
    int early_stop_patience = 15;
    uint64_t seed = 0;

    void validate() const {
        if (batch_size < 1) throw ValidationError("batch_size must be positive");
        if (initial_lr <= 0.0) throw ValidationError("initial_lr must be positive");
        if (plateau_factor <= 0.0 || plateau_factor >= 1.0)
            throw ValidationError("plateau_factor must lie in (0,1)");
        if (plateau_patience < 0) throw ValidationError("plateau_patience must be >= 0");
        if (max_epochs < 1) throw ValidationError("max_epochs must be positive");
        if (early_stop_patience < 1) throw ValidationError("early_stop_patience must be positive");
    }
};

namespace detail {

inline void fill_batch(const std::vector<TrainingPair>& pairs,
                       const std::vector<std::size_t>& order, std::size_t begin, std::size_t end,
                       nn::Tensor4& inputs, nn::Tensor4& targets) {
    const TrainingPair& first = pairs[order[begin]];
    const int n = static_cast<int>(end - begin);
    inputs = nn::Tensor4(n, first.tensor.channels, first.tensor.grid_h, first.tensor.grid_w);
    targets = nn::Tensor4(n, 1, first.target.height, first.target.width);
    for (std::size_t k = begin; k < end; ++k) {
        const TrainingPair& p = pairs[order[k]];
        if (p.tensor.grid_h != first.tensor.grid_h || p.tensor.grid_w != first.tensor.grid_w ||
            p.tensor.channels != first.tensor.channels)
            throw DimensionError("training images must share one size per batch");
        const int ni = static_cast<int>(k - begin);
        for (int i = 0; i < p.tensor.grid_h; ++i)
            for (int j = 0; j < p.tensor.grid_w; ++j)
                for (int m = 0; m < p.tensor.channels; ++m)
                    inputs.at(ni, m, i, j) = p.tensor.at(i, j, m);
        std::copy(p.target.pixels.begin(), p.target.pixels.end(), targets.item(ni));
    }
}

inline std::vector<std::vector<double>> snapshot_state(BcsUnet& model) {
    std::vector<std::vector<double>> snap;
    for (const auto& p : model.state()) snap.push_back(*p.value);
    return snap;
}

inline void restore_state(BcsUnet& model, const std::vector<std::vector<double>>& snap) {
    const auto refs = model.state();
    for (std::size_t i = 0; i < refs.size(); ++i) *refs[i].value = snap[i];
}

}  // namespace detail

// Inference-mode MAE over a fixed pair set, evaluated in batches.
inline double evaluate_loss(BcsUnet& model, const std::vector<TrainingPair>& pairs,
                            int batch_size) {
    if (pairs.empty()) throw ValidationError("cannot evaluate on an empty set");
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    double total = 0.0;
    nn::Tensor4 inputs, targets;
    for (std::size_t begin = 0; begin < pairs.size(); begin += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(pairs.size(), begin + static_cast<std::size_t>(batch_size));
        detail::fill_batch(pairs, order, begin, end, inputs, targets);
        const nn::Tensor4 out = model.forward(inputs, false);
        total += mae_loss(out, targets) * static_cast<double>(end - begin);
    }
    return total / static_cast<double>(pairs.size());
}

// Adam + reduce-on-plateau + early stopping; returns the artifact holding the
// best-validation weights. Deterministic for a fixed TrainConfig::seed.
inline ModelArtifact train(ModelArtifact artifact, const std::vector<CorpusImage>& train_set,
                           const std::vector<CorpusImage>& val_set, const BlockMatrix& matrix,
                           const TrainConfig& tcfg, const AugmentConfig& aug = {},
                           std::ostream* log = nullptr) {
    tcfg.validate();
    if (train_set.empty() || val_set.empty())
        throw ValidationError("train and validation sets must be non-empty");
    if (artifact.config().in_channels != matrix.rows)
        throw DimensionError("model in_channels must equal the matrix row count");
    if (artifact.config().block_size != matrix.block_size)
        throw DimensionError("model block_size must equal the matrix block size");

    BcsUnet& model = *artifact.model;
    nn::Adam opt(model.parameters(), tcfg.initial_lr);
    nn::PlateauScheduler scheduler(tcfg.plateau_factor, tcfg.plateau_patience);

    AugmentConfig no_aug = aug;
    no_aug.enabled = false;
    const std::vector<TrainingPair> val_pairs = make_pairs(val_set, matrix, no_aug, 0);

    double best_val = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_state = detail::snapshot_state(model);
    int epochs_since_best = 0;
    int epochs_run = 0;

    if (log) *log << "epoch,train_loss,val_loss,lr\n";

    for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
        const std::vector<TrainingPair> pairs =
            make_pairs(train_set, matrix, aug, derive_seed(tcfg.seed, 0x617567, static_cast<uint64_t>(epoch)));
        std::vector<std::size_t> order(pairs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng(derive_seed(tcfg.seed, 0x736866, static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double train_loss = 0.0;
        nn::Tensor4 inputs, targets;
        for (std::size_t begin = 0; begin < pairs.size();
             begin += static_cast<std::size_t>(tcfg.batch_size)) {
            const std::size_t end =
                std::min(pairs.size(), begin + static_cast<std::size_t>(tcfg.batch_size));
            detail::fill_batch(pairs, order, begin, end, inputs, targets);
            opt.zero_grad();
            const nn::Tensor4 out = model.forward(inputs, true);
            train_loss += mae_loss(out, targets) * static_cast<double>(end - begin);
            model.backward(mae_loss_grad(out, targets));
            opt.step();
        }
        train_loss /= static_cast<double>(pairs.size());
        const double val_loss = evaluate_loss(model, val_pairs, tcfg.batch_size);
        epochs_run = epoch;

        if (log)
            *log << epoch << ',' << std::setprecision(10) << train_loss << ',' << val_loss << ','
                 << opt.lr() << '\n';

        if (val_loss < best_val - 1e-12) {
            best_val = val_loss;
            best_state = detail::snapshot_state(model);
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
        }
        if (epochs_since_best >= tcfg.early_stop_patience) break;
        scheduler.step(val_loss, opt);
    }

    detail::restore_state(model, best_state);
    artifact.matrix_fingerprint = matrix.fingerprint;
    artifact.ratio = static_cast<double>(matrix.rows) /
                     (static_cast<double>(matrix.block_size) * matrix.block_size);
    artifact.metadata.epochs_run = epochs_run;
    artifact.metadata.best_val_loss = best_val;
    artifact.metadata.trained = true;
    return artifact;
}

}  // namespace bcs
