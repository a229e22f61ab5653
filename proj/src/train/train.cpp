#include "fcnseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include "fcnseg/errors.hpp"
#include "fcnseg/layers.hpp"

namespace fcnseg {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
    if (!(step_fraction > 0.0 && step_fraction <= 1.0)) throw ConfigError("step_fraction must be in (0, 1]");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
    if (!(base_lr >= 0.0) || !std::isfinite(base_lr)) throw ConfigError("base_lr must be finite and >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

double lr_at(const TrainConfig& config, int epoch) {
    config.validate();
    if (epoch < 0 || epoch >= config.epochs) {
        throw ConfigError("epoch " + std::to_string(epoch) + " outside 0.." + std::to_string(config.epochs - 1));
    }
    // The small slack keeps products such as 0.33 * 100 from rounding up a whole step.
    const int step = std::max(1, static_cast<int>(std::ceil(config.step_fraction * config.epochs - 1e-9)));
    const int drops = epoch / step;
    // Dividing by (1/gamma)^k gives correctly rounded decimal rates (1e-5, 1e-6) for gamma = 0.1.
    return config.base_lr / std::pow(1.0 / config.gamma, drops);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

namespace {

struct ItemOutcome {
    LossResult loss;
    std::size_t correct = 0;
    std::size_t counted = 0;
};

std::size_t argmax_channel(const Tensor& t, std::size_t p) {
    const Shape s = t.shape();
    std::size_t best = 0;
    for (std::size_t c = 1; c < s.c; ++c)
        if (t.data()[c * s.plane() + p] > t.data()[best * s.plane() + p]) best = c;
    return best;
}

ItemOutcome evaluate_item(const Tensor& scores, const Sample& sample, TaskKind task) {
    ItemOutcome out;
    out.loss = task_loss(scores, sample, task);
    if (task == TaskKind::kClassification) {
        const Shape s = scores.shape();
        std::vector<double> mean(s.c, 0.0);
        for (std::size_t c = 0; c < s.c; ++c) {
            for (std::size_t p = 0; p < s.plane(); ++p) mean[c] += scores.data()[c * s.plane() + p];
        }
        const auto best = static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin());
        out.correct = best == static_cast<std::size_t>(sample.class_label) ? 1 : 0;
        out.counted = 1;
        return out;
    }
    for (std::size_t p = 0; p < sample.label.pixels.size(); ++p) {
        const auto y = sample.label.pixels[p];
        if (y == kIgnoreLabel) continue;
        ++out.counted;
        if (argmax_channel(scores, p) == y) ++out.correct;
    }
    return out;
}

}  // namespace

LossResult task_loss(const Tensor& scores, const Sample& sample, TaskKind task) {
    if (task == TaskKind::kSegmentation) return softmax_xent_pixelwise(scores, sample.label);

    // Image-level loss on the spatial mean of the score map.
    const Shape s = scores.shape();
    if (s.n != 1) throw ShapeError("classification loss expects a single item, got " + s.to_string());
    if (sample.class_label < 0 || static_cast<std::size_t>(sample.class_label) >= s.c) {
        throw DataError("sample " + sample.id + ": class label " + std::to_string(sample.class_label) + " outside 0.." +
                        std::to_string(s.c - 1));
    }
    Tensor logits(Shape{1, s.c, 1, 1});
    const double inv = 1.0 / static_cast<double>(s.plane());
    for (std::size_t c = 0; c < s.c; ++c) {
        double sum = 0.0;
        for (std::size_t p = 0; p < s.plane(); ++p) sum += scores.data()[c * s.plane() + p];
        logits.data()[c] = sum * inv;
    }
    LabelImage target(1, 1, static_cast<std::uint8_t>(sample.class_label));
    auto pooled = softmax_xent_pixelwise(logits, target);
    LossResult r;
    r.loss = pooled.loss;
    r.counted_pixels = 1;
    r.score_grad = Tensor(s);
    for (std::size_t c = 0; c < s.c; ++c) {
        const double g = pooled.score_grad.data()[c] * inv;
        for (std::size_t p = 0; p < s.plane(); ++p) r.score_grad.data()[c * s.plane() + p] = g;
    }
    return r;
}

ValidationResult validate(const SegModel& model, const Dataset& split, TaskKind task) {
    ValidationResult r;
    if (split.empty()) return r;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t counted = 0;
    for (const auto& sample : split) {
        const Tensor scores = forward(model, sample.image);
        const auto o = evaluate_item(scores, sample, task);
        loss_sum += o.loss.loss;
        correct += o.correct;
        counted += o.counted;
    }
    r.loss = loss_sum / static_cast<double>(split.size());
    r.pixel_accuracy = counted ? static_cast<double>(correct) / static_cast<double>(counted) : 0.0;
    return r;
}

SgdTrainer::SgdTrainer(SegModel& model, TrainConfig config, TaskKind task)
    : model_(model), config_(config), task_(task), velocity_(model.params.size()) {
    config_.validate();
}

void SgdTrainer::step(double lr) {
    for (std::size_t i = 0; i < model_.params.size(); ++i) {
        Parameter& p = model_.params[i];
        if (!p.trainable || !p.value.has_grad()) continue;
        auto& v = velocity_[i];
        if (v.size() != p.value.size()) v.assign(p.value.size(), 0.0);
        auto w = p.value.data();
        auto g = p.value.grad();
        for (std::size_t j = 0; j < w.size(); ++j) {
            v[j] = config_.momentum * v[j] - lr * g[j];
            w[j] += v[j];
        }
        p.value.zero_grad();
    }
}

EpochStats SgdTrainer::train_epoch(const Dataset& split, int epoch) {
    if (split.empty()) throw DataError("train_epoch: empty dataset split");
    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr_at(config_, epoch);

    const auto order = epoch_order(split.size(), config_.seed, epoch);
    const auto batch = static_cast<std::size_t>(config_.batch_size);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t counted = 0;
    model_.zero_grads();

    for (std::size_t start = 0, b = 0; start < order.size(); start += batch, ++b) {
        const std::size_t end = std::min(order.size(), start + batch);
        for (std::size_t k = start; k < end; ++k) {
            const Sample& sample = split[order[k]];
            ForwardOptions fo;
            fo.training = true;
            fo.dropout_seed = config_.seed ^ (static_cast<std::uint64_t>(epoch) << 32) ^ k;
            const auto cache = forward_cached(model_, sample.image, fo);
            auto o = evaluate_item(cache.scores(), sample, task_);
            if (!std::isfinite(o.loss.loss)) {
                throw DivergenceError(b, "non-finite loss on item '" + sample.id + "' in epoch " + std::to_string(epoch));
            }
            loss_sum += o.loss.loss;
            correct += o.correct;
            counted += o.counted;
            if (end - start > 1) {
                const double inv = 1.0 / static_cast<double>(end - start);
                for (double& g : o.loss.score_grad.data()) g *= inv;
            }
            backward(model_, cache, o.loss.score_grad);
        }
        step(stats.lr);
    }
    stats.train_loss = loss_sum / static_cast<double>(split.size());
    stats.train_pixel_acc = counted ? static_cast<double>(correct) / static_cast<double>(counted) : 0.0;
    return stats;
}

void write_epoch_csv(const std::filesystem::path& path, const std::vector<EpochStats>& stats) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write " + path.string());
    f << "epoch,lr,train_loss,val_loss,val_pixel_acc\n";
    f << std::setprecision(10);
    for (const auto& s : stats) {
        f << s.epoch << ',' << s.lr << ',' << s.train_loss << ',';
        if (s.val_loss) f << *s.val_loss;
        f << ',';
        if (s.val_pixel_acc) f << *s.val_pixel_acc;
        f << '\n';
    }
}

}  // namespace fcnseg
