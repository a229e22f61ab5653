#include "fcnseg/folds.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "fcnseg/errors.hpp"

namespace fcnseg {
namespace {

// mt19937_64 output is fixed by the standard but distributions are not, so draws
// are done here to keep plans identical across standard libraries.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % bound;
}

template <class T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[draw_below(rng, i)]);
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    return std::mt19937_64(seq);
}

}  // namespace

const std::vector<std::string>& Fold::items(FoldRole role) const {
    switch (role) {
        case FoldRole::kTrain: return train;
        case FoldRole::kValidation: return validation;
        case FoldRole::kTest: return test;
    }
    return train;
}

FoldPlan make_fold_plan(const std::vector<std::string>& ids, std::uint64_t seed) {
    if (ids.size() < kMinFoldItems) {
        throw ConfigError("fold plan needs at least " + std::to_string(kMinFoldItems) + " items, got " +
                          std::to_string(ids.size()));
    }
    if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size()) {
        throw ConfigError("fold plan: duplicate item ids");
    }
    const std::size_t n = ids.size();
    FoldPlan plan;
    plan.seed = seed;
    plan.ids = ids;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    auto rng = make_rng(seed, 0);
    shuffle(order, rng);

    for (int k = 0; k < kNumFolds; ++k) {
        const std::size_t lo = n * k / kNumFolds;
        const std::size_t hi = n * (k + 1) / kNumFolds;
        const double test_k = static_cast<double>(hi - lo);
        // Validation absorbs half of the test shard's rounding so train stays within one item of 70%.
        const auto val_k = static_cast<std::size_t>(std::lround(0.1 * n + (0.2 * n - test_k) / 2.0));

        Fold fold;
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < n; ++i) {
            if (i >= lo && i < hi) {
                fold.test.push_back(ids[order[i]]);
            } else {
                rest.push_back(order[i]);
            }
        }
        auto fold_rng = make_rng(seed, static_cast<std::uint32_t>(k + 1));
        shuffle(rest, fold_rng);
        for (std::size_t i = 0; i < rest.size(); ++i) {
            (i < val_k ? fold.validation : fold.train).push_back(ids[rest[i]]);
        }
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

void check_fold_plan(const FoldPlan& plan) {
    const std::size_t n = plan.ids.size();
    const std::set<std::string> all(plan.ids.begin(), plan.ids.end());
    if (all.size() != n) throw DataError("fold plan: duplicate ids");
    if (plan.folds.size() != static_cast<std::size_t>(kNumFolds)) throw DataError("fold plan must have 5 folds");

    std::set<std::string> tested;
    for (std::size_t k = 0; k < plan.folds.size(); ++k) {
        const Fold& f = plan.folds[k];
        const std::string where = "fold " + std::to_string(k) + ": ";
        std::set<std::string> seen;
        for (const auto* part : {&f.train, &f.validation, &f.test}) {
            for (const auto& id : *part) {
                if (!all.count(id)) throw DataError(where + "unknown id '" + id + "'");
                if (!seen.insert(id).second) throw DataError(where + "id '" + id + "' appears in two roles");
            }
        }
        if (seen.size() != n) throw DataError(where + "roles do not cover the dataset");
        for (const auto& id : f.test) {
            if (!tested.insert(id).second) throw DataError(where + "id '" + id + "' is in two test shards");
        }
        auto near = [&](std::size_t got, double frac, const char* role) {
            if (std::abs(static_cast<double>(got) - frac * n) > 1.0) {
                throw DataError(where + role + " size " + std::to_string(got) + " is not within one item of " +
                                std::to_string(frac * n));
            }
        };
        near(f.train.size(), 0.7, "train");
        near(f.validation.size(), 0.1, "validation");
        near(f.test.size(), 0.2, "test");
    }
    if (tested.size() != n) throw DataError("test shards do not cover the dataset");
}

nlohmann::json to_json(const FoldPlan& plan) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : plan.folds) {
        folds.push_back({{"train", f.train}, {"validation", f.validation}, {"test", f.test}});
    }
    return {{"seed", plan.seed}, {"ids", plan.ids}, {"folds", folds}};
}

FoldPlan fold_plan_from_json(const nlohmann::json& j) {
    try {
        FoldPlan plan;
        plan.seed = j.at("seed").get<std::uint64_t>();
        plan.ids = j.at("ids").get<std::vector<std::string>>();
        for (const auto& f : j.at("folds")) {
            plan.folds.push_back({f.at("train").get<std::vector<std::string>>(),
                                  f.at("validation").get<std::vector<std::string>>(),
                                  f.at("test").get<std::vector<std::string>>()});
        }
        return plan;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("fold plan JSON: ") + e.what());
    }
}

void save_fold_plan(const std::filesystem::path& path, const FoldPlan& plan) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write " + path.string());
    f << to_json(plan).dump(1) << '\n';
}

FoldPlan load_fold_plan(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return fold_plan_from_json(j);
}

}  // namespace fcnseg
