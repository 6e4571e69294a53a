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
#include <ktrace/recipes.hpp>

#include <algorithm>
#include <cctype>
#include <string>

namespace ktrace {

namespace {

using F = FeatureFamily;
using K = FamilyKind;

std::string normalize(std::string_view text) {
    std::string out;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else if (c == '+')
            out += "plus";
    }
    return out;
}

std::vector<FeatureFamily> base_families(ModelName name) {
    const F bias = F::of(K::Bias), student = F::of(K::StudentOneHot), question = F::of(K::QuestionOneHot),
            kc = F::of(K::KCOneHot);
    switch (name) {
        case ModelName::IRT: return {bias, student, question};
        case ModelName::PFA: return {bias, kc, F::counts(CountScope::KC)};
        case ModelName::DAS3H: return {bias, student, question, kc, F::tw_counts(CountScope::KC)};
        case ModelName::BestLR:
            return {bias, student, question, kc, F::counts(CountScope::Total), F::counts(CountScope::KC)};
        case ModelName::BestLRPlus: {
            auto f = base_families(ModelName::BestLR);
            f.insert(f.end(), {F::tw_counts(CountScope::Total), F::tw_counts(CountScope::KC),
                               F::tw_counts(CountScope::Question), F::of(K::SmoothedAvgCorrect),
                               F::of(K::ResponsePattern)});
            return f;
        }
        case ModelName::AugmentedLR: return base_families(ModelName::BestLR);
    }
    return {};
}

std::vector<FeatureFamily> combined_tw() {
    return {F::tw_counts(CountScope::Total), F::tw_counts(CountScope::KC), F::tw_counts(CountScope::Question)};
}

std::vector<FeatureFamily> with_tail(std::vector<FeatureFamily> head) {
    auto out = combined_tw();
    out.insert(out.end(), head.begin(), head.end());
    out.push_back(F::of(K::SmoothedAvgCorrect));
    out.push_back(F::of(K::ResponsePattern));
    return out;
}

}// namespace

std::string_view to_string(ModelName name) {
    switch (name) {
        case ModelName::IRT: return "irt";
        case ModelName::PFA: return "pfa";
        case ModelName::DAS3H: return "das3h";
        case ModelName::BestLR: return "best-lr";
        case ModelName::BestLRPlus: return "best-lr+";
        case ModelName::AugmentedLR: return "augmented-lr";
    }
    return "unknown";
}

std::optional<ModelName> parse_model_name(std::string_view text) {
    const auto n = normalize(text);
    if (n == "irt")
        return ModelName::IRT;
    if (n == "pfa")
        return ModelName::PFA;
    if (n == "das3h")
        return ModelName::DAS3H;
    if (n == "bestlr")
        return ModelName::BestLR;
    if (n == "bestlrplus")
        return ModelName::BestLRPlus;
    if (n == "augmentedlr" || n == "auglr")
        return ModelName::AugmentedLR;
    return std::nullopt;
}

Json NamedRecipe::to_json() const { return {{"name", std::string(to_string(name))}, {"recipe", recipe.to_json()}}; }

std::vector<FeatureFamily> augmented_markers(const DatasetManifest& manifest) {
    const auto key = normalize(manifest.name);
    const F lag = F::lag(TimeOf::Current), elapsed = F::elapsed(TimeOf::Prior), module = F::of(K::StudyModuleOneHot),
            pre = F::of(K::PrereqCounts), post = F::of(K::PostreqCounts), videos = F::of(K::VideoWatchedCounts);
    if (key == "elemmath2021")
        return with_tail({lag, elapsed, module, F::context(ContextField::Topic), pre, post, videos,
                          F::of(K::ReadingCounts)});
    if (key == "ednetkt3")
        return with_tail({lag, elapsed, module, F::of(K::PartAreaCounts), videos});
    if (key == "eedi")
        return with_tail({module, F::context(ContextField::TeacherGroup), F::context(ContextField::Bundle), pre});
    if (key == "junyi15")
        return with_tail({lag, elapsed, F::datetime(DatePart::Hour), module, pre, post, F::of(K::HintCounts)});
    return with_tail({lag, elapsed, module, F::context(ContextField::TeacherGroup), F::context(ContextField::Topic),
                      F::context(ContextField::Bundle), F::of(K::PartAreaCounts), pre, post, videos,
                      F::of(K::ReadingCounts), F::of(K::HintCounts)});
}

NamedRecipe resolve(ModelName name, const DatasetManifest& manifest, const std::vector<FeatureFamily>& extras,
                    const std::optional<std::vector<FeatureFamily>>& augmented_override) {
    NamedRecipe out{name, {}};
    std::vector<std::string> gaps;
    auto require = [&](FeatureFamily f) {
        if (!permitted(f, manifest))
            gaps.push_back(to_string(f));
        out.recipe.add(f);
    };
    for (auto f : base_families(name))
        require(f);
    if (name == ModelName::AugmentedLR) {
        for (auto f : augmented_override ? *augmented_override : augmented_markers(manifest))
            if (permitted(f, manifest) && f != F::elapsed(TimeOf::Current))
                out.recipe.add(f);
    }
    for (auto f : extras)
        require(f);
    if (!gaps.empty()) {
        std::string list;
        for (const auto& g : gaps)
            list += (list.empty() ? "" : ", ") + g;
        throw ResolutionError("model " + std::string(to_string(name)) + " needs families dataset '" + manifest.name +
                              "' cannot provide: " + list);
    }
    return out;
}

}// namespace ktrace
