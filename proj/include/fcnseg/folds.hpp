#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace fcnseg {

enum class FoldRole { kTrain, kValidation, kTest };

struct Fold {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;

    const std::vector<std::string>& items(FoldRole role) const;
};

/// Five folds with disjoint test shards covering every item; each fold draws its
/// validation items from the non-test remainder.
struct FoldPlan {
    std::uint64_t seed = 0;
    std::vector<std::string> ids;  // input order
    std::vector<Fold> folds;
};

inline constexpr int kNumFolds = 5;
inline constexpr std::size_t kMinFoldItems = 10;

/// Deterministic in (ids, seed). Throws ConfigError for fewer than 10 or duplicate ids.
FoldPlan make_fold_plan(const std::vector<std::string>& ids, std::uint64_t seed);

/// Checks partition, coverage and the 70/10/20 ratios (±1 item). Throws DataError.
void check_fold_plan(const FoldPlan& plan);

nlohmann::json to_json(const FoldPlan& plan);
FoldPlan fold_plan_from_json(const nlohmann::json& j);
void save_fold_plan(const std::filesystem::path& path, const FoldPlan& plan);
FoldPlan load_fold_plan(const std::filesystem::path& path);

}  // namespace fcnseg
