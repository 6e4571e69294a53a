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
#ifndef KTRACE_RECIPES_HPP_
#define KTRACE_RECIPES_HPP_

#include <optional>
#include <string_view>
#include <vector>

#include <ktrace/core.hpp>
#include <ktrace/features.hpp>

namespace ktrace {

/// A named model asks for a family the dataset cannot provide.
class ResolutionError : public ConfigError {
  public:
    using ConfigError::ConfigError;
};

enum class ModelName : std::uint8_t { IRT, PFA, DAS3H, BestLR, BestLRPlus, AugmentedLR };

std::string_view to_string(ModelName name);
/// Accepts "irt", "pfa", "das3h", "best-lr", "best-lr+", "augmented-lr" (case-insensitive,
/// '_' and '-' interchangeable, "plus" for '+').
std::optional<ModelName> parse_model_name(std::string_view text);

struct NamedRecipe {
    ModelName name = ModelName::IRT;
    Recipe recipe;

    Json to_json() const;
};

/// Families added on top of Best-LR by AugmentedLR for this dataset before
/// intersecting with its capabilities. Known datasets get their own marker set.
std::vector<FeatureFamily> augmented_markers(const DatasetManifest& manifest);

/// Resolves a named model. `extras` are appended and must all be supported;
/// `augmented_override` replaces the AugmentedLR marker set.
NamedRecipe resolve(ModelName name, const DatasetManifest& manifest, const std::vector<FeatureFamily>& extras = {},
                    const std::optional<std::vector<FeatureFamily>>& augmented_override = std::nullopt);

}// namespace ktrace

#endif// KTRACE_RECIPES_HPP_
