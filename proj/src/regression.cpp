/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/
#include <ktrace/regression.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include <ktrace/parallel.hpp>

namespace ktrace {

namespace {

constexpr std::size_t kShardRows = 1024;
constexpr std::size_t kMaxShards = 64;
constexpr int kMaxHalvings = 60;

std::size_t shard_count(std::size_t rows) {
    return std::clamp<std::size_t>((rows + kShardRows - 1) / kShardRows, 1, kMaxShards);
}

std::pair<std::size_t, std::size_t> shard_range(std::size_t shard, std::size_t shards, std::size_t rows) {
    return {rows * shard / shards, rows * (shard + 1) / shards};
}

std::vector<std::uint8_t> penalty_mask(std::size_t dimension, std::span<const std::uint32_t> unpenalized) {
    std::vector<std::uint8_t> mask(dimension, 1);
    for (auto i : unpenalized)
        if (i < dimension)
            mask[i] = 0;
    return mask;
}

double penalty(std::span<const double> w, const std::vector<std::uint8_t>& mask, double l2) {
    if (l2 == 0.0)
        return 0.0;
    double sum = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j)
        if (mask[j])
            sum += w[j] * w[j];
    return 0.5 * l2 * sum;
}

void check_batch(std::span<const SparseVector> phi, std::span<const std::uint8_t> labels) {
    if (phi.size() != labels.size())
        throw ArgumentError("feature and label counts differ");
    for (auto y : labels)
        if (y > 1)
            throw ArgumentError("labels must be 0 or 1");
}

}// namespace

double sigmoid(double z) {
    constexpr double kLow = std::numeric_limits<double>::min();
    constexpr double kHigh = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    double p;
    if (z >= 0.0) {
        p = 1.0 / (1.0 + std::exp(-z));
    } else {
        const double e = std::exp(z);
        p = e / (1.0 + e);
    }
    return std::clamp(p, kLow, kHigh);
}

double log_loss_from_logit(double z, bool y) {
    // softplus(-z) for y = 1, softplus(z) for y = 0
    const double s = y ? -z : z;
    return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s)));
}

// Config ---------------------------------------------------------------------

void TrainConfig::validate() const {
    if (max_epochs < 1)
        throw ConfigError("max_epochs must be positive");
    if (!(tolerance > 0.0))
        throw ConfigError("tolerance must be positive");
    if (!(l2 >= 0.0))
        throw ConfigError("l2 must be non-negative");
}

Json TrainConfig::to_json() const {
    return {{"max_epochs", max_epochs}, {"tolerance", tolerance}, {"l2", l2}, {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const Json& j) {
    TrainConfig c;
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.tolerance = j.value("tolerance", c.tolerance);
    c.l2 = j.value("l2", c.l2);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

Json TrainMetadata::to_json() const {
    return {{"seed", seed},
            {"epochs", epochs},
            {"max_epochs", max_epochs},
            {"l2", l2},
            {"tolerance", tolerance},
            {"final_nll", final_nll},
            {"last_step", last_step},
            {"converged", converged},
            {"examples", examples},
            {"schedule", "preconditioned-gd-step-halving"}};
}

TrainMetadata TrainMetadata::from_json(const Json& j) {
    TrainMetadata m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.epochs = j.at("epochs").get<int>();
    m.max_epochs = j.at("max_epochs").get<int>();
    m.l2 = j.at("l2").get<double>();
    m.tolerance = j.at("tolerance").get<double>();
    m.final_nll = j.at("final_nll").get<double>();
    m.last_step = j.at("last_step").get<double>();
    m.converged = j.at("converged").get<bool>();
    m.examples = j.at("examples").get<std::size_t>();
    return m;
}

// Loss -----------------------------------------------------------------------

LossAndGradient nll_and_gradient(std::span<const SparseVector> phi, std::span<const std::uint8_t> labels,
                                 std::span<const double> w, double l2, std::span<const std::uint32_t> unpenalized,
                                 int jobs) {
    check_batch(phi, labels);
    const std::size_t d = w.size();
    const std::size_t shards = shard_count(phi.size());
    std::vector<double> shard_nll(shards, 0.0);
    std::vector<std::vector<double>> shard_grad(shards);
    parallel_for(shards, jobs, [&](std::size_t s) {
        auto [lo, hi] = shard_range(s, shards, phi.size());
        auto& g = shard_grad[s];
        g.assign(d, 0.0);
        double nll = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double z = dot(phi[i], w);
            const bool y = labels[i] != 0;
            nll += log_loss_from_logit(z, y);
            const double r = sigmoid(z) - (y ? 1.0 : 0.0);
            for (const auto& e : phi[i].entries())
                g[e.index] += r * e.value;
        }
        shard_nll[s] = nll;
    });
    LossAndGradient out;
    out.gradient.assign(d, 0.0);
    for (std::size_t s = 0; s < shards; ++s) {
        out.nll += shard_nll[s];
        for (std::size_t j = 0; j < d; ++j)
            out.gradient[j] += shard_grad[s][j];
    }
    const auto mask = penalty_mask(d, unpenalized);
    out.nll += penalty(w, mask, l2);
    for (std::size_t j = 0; j < d; ++j)
        if (mask[j])
            out.gradient[j] += l2 * w[j];
    return out;
}

double penalized_nll(std::span<const SparseVector> phi, std::span<const std::uint8_t> labels,
                     std::span<const double> w, double l2, std::span<const std::uint32_t> unpenalized, int jobs) {
    check_batch(phi, labels);
    const std::size_t shards = shard_count(phi.size());
    std::vector<double> shard_nll(shards, 0.0);
    parallel_for(shards, jobs, [&](std::size_t s) {
        auto [lo, hi] = shard_range(s, shards, phi.size());
        double nll = 0.0;
        for (std::size_t i = lo; i < hi; ++i)
            nll += log_loss_from_logit(dot(phi[i], w), labels[i] != 0);
        shard_nll[s] = nll;
    });
    double total = 0.0;
    for (double v : shard_nll)
        total += v;
    return total + penalty(w, penalty_mask(w.size(), unpenalized), l2);
}

// Training -------------------------------------------------------------------

FitResult fit_logistic(std::span<const SparseVector> phi, std::span<const std::uint8_t> labels,
                       std::uint32_t dimension, std::span<const std::uint32_t> unpenalized,
                       const TrainConfig& config) {
    config.validate();
    check_batch(phi, labels);
    if (phi.empty())
        throw ArgumentError("cannot train on an empty example set");

    FitResult result;
    auto& w = result.weights;
    if (config.initial_weights) {
        if (config.initial_weights->size() != dimension)
            throw ArgumentError("initial weights do not match the feature dimension");
        w = *config.initial_weights;
    } else {
        w.assign(dimension, 0.0);
    }
    auto& meta = result.metadata;
    meta.seed = config.seed;
    meta.max_epochs = config.max_epochs;
    meta.l2 = config.l2;
    meta.tolerance = config.tolerance;
    meta.examples = phi.size();

    // Diagonal curvature bound: sigmoid' <= 1/4.
    const auto mask = penalty_mask(dimension, unpenalized);
    std::vector<double> precond(dimension, 0.0);
    for (const auto& v : phi)
        for (const auto& e : v.entries()) {
            if (e.index >= dimension)
                throw std::out_of_range("feature index outside the model dimension");
            precond[e.index] += 0.25 * e.value * e.value;
        }
    for (std::size_t j = 0; j < dimension; ++j)
        precond[j] += (mask[j] ? config.l2 : 0.0) + 1e-12;

    auto diverged = [&](double value, int epoch) {
        if (!std::isfinite(value))
            throw TrainingDivergence("non-finite loss at epoch " + std::to_string(epoch) + " (examples " +
                                     std::to_string(phi.size()) + ", dimension " + std::to_string(dimension) +
                                     ", l2 " + std::to_string(config.l2) + ")");
    };

    auto current = nll_and_gradient(phi, labels, w, config.l2, unpenalized, config.jobs);
    diverged(current.nll, 0);
    double step = 1.0;
    std::vector<double> direction(dimension), trial(dimension);
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        for (std::size_t j = 0; j < dimension; ++j)
            direction[j] = -current.gradient[j] / precond[j];
        step = std::min(1.0, 2.0 * step);
        double trial_nll = 0.0;
        bool accepted = false;
        for (int h = 0; h < kMaxHalvings; ++h, step *= 0.5) {
            for (std::size_t j = 0; j < dimension; ++j)
                trial[j] = w[j] + step * direction[j];
            trial_nll = penalized_nll(phi, labels, trial, config.l2, unpenalized, config.jobs);
            if (std::isfinite(trial_nll) && trial_nll < current.nll) {
                accepted = true;
                break;
            }
        }
        meta.epochs = epoch;
        if (!accepted) {
            meta.converged = true;
            break;
        }
        const double improvement = (current.nll - trial_nll) / std::max(std::abs(current.nll), 1.0);
        w.swap(trial);
        current = nll_and_gradient(phi, labels, w, config.l2, unpenalized, config.jobs);
        diverged(current.nll, epoch);
        if (improvement < config.tolerance) {
            meta.converged = true;
            break;
        }
    }
    meta.final_nll = current.nll;
    meta.last_step = step;
    return result;
}

// Model ----------------------------------------------------------------------

Model::Model(Recipe recipe, std::string encoder_digest, std::vector<double> weights, TrainMetadata metadata)
    : recipe_(std::move(recipe)),
      encoder_digest_(std::move(encoder_digest)),
      weights_(std::move(weights)),
      metadata_(metadata) {}

double Model::logit(const SparseVector& phi) const { return dot(phi, weights_); }

Json Model::to_json() const {
    Json weights = Json::array();
    for (std::size_t i = 0; i < weights_.size(); ++i)
        if (weights_[i] != 0.0)
            weights.push_back(Json::array({i, weights_[i]}));
    return {{"version", 1},
            {"recipe", recipe_.to_json()},
            {"encoder_digest", encoder_digest_},
            {"dimension", weights_.size()},
            {"weights", weights},
            {"train", metadata_.to_json()}};
}

Model Model::from_json(const Json& j) {
    if (j.at("version").get<int>() != 1)
        throw ConfigError("unsupported model version");
    std::vector<double> weights(j.at("dimension").get<std::size_t>(), 0.0);
    for (const auto& e : j.at("weights")) {
        const auto i = e.at(0).get<std::size_t>();
        if (i >= weights.size())
            throw ConfigError("model weight index outside its dimension");
        weights[i] = e.at(1).get<double>();
    }
    return Model(Recipe::from_json(j.at("recipe")), j.at("encoder_digest").get<std::string>(), std::move(weights),
                 TrainMetadata::from_json(j.at("train")));
}

bool operator==(const Model& a, const Model& b) {
    return a.weights_ == b.weights_ && a.encoder_digest_ == b.encoder_digest_ &&
           a.recipe_.to_json() == b.recipe_.to_json() && a.metadata_.to_json() == b.metadata_.to_json();
}

std::string encoder_digest(const Encoder& encoder, const Interners& names) {
    return hex_digest(encoder.to_json(names).dump());
}

Model train_model(const Encoder& encoder, const Interners& names, const ExampleSet& examples,
                  const TrainConfig& config) {
    const auto unpenalized = encoder.unpenalized();
    auto fit = fit_logistic(examples.phi, examples.labels, encoder.dimension(), unpenalized, config);
    return Model(encoder.recipe(), encoder_digest(encoder, names), std::move(fit.weights), fit.metadata);
}

}// namespace ktrace
