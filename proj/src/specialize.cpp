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
#include <ktrace/specialize.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>

#include <ktrace/parallel.hpp>

namespace ktrace {

namespace {

std::string format_split(double v) {
    if (std::isinf(v))
        return "inf";
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

double parse_split(std::string_view text) {
    if (text == "inf")
        return kInfiniteWindow;
    double v = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size())
        throw ConfigError("bad split point '" + std::string(text) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        out.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

const std::string kMissingKey = "(none)";

}// namespace

// Scheme ---------------------------------------------------------------------

std::vector<double> PartitionScheme::default_splitpoints() { return {0, 10, 50, 100, 250, 500, kInfiniteWindow}; }

PartitionScheme PartitionScheme::response_index(std::vector<double> splits) {
    PartitionScheme s;
    s.kind = Kind::ResponseIndex;
    s.splitpoints = std::move(splits);
    s.validate();
    return s;
}

PartitionScheme PartitionScheme::by_feature(PartitionField field) {
    PartitionScheme s;
    s.kind = Kind::ByFeature;
    s.field = field;
    return s;
}

PartitionScheme PartitionScheme::parse(std::string_view text) {
    const auto colon = text.find(':');
    const auto head = text.substr(0, colon);
    const auto arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    if (head == "response-index" || head == "response_index" || head == "time") {
        if (arg.empty())
            return response_index();
        std::vector<double> splits;
        for (auto part : split(arg, ','))
            splits.push_back(parse_split(part));
        return response_index(std::move(splits));
    }
    if (head == "feature" || head == "by-feature") {
        PartitionField f;
        if (arg == "study_module")
            f.kind = PartitionField::Kind::StudyModule;
        else if (arg == "question")
            f.kind = PartitionField::Kind::Question;
        else if (arg == "kc")
            f.kind = PartitionField::Kind::KC;
        else if (auto c = parse_context_field(arg)) {
            f.kind = PartitionField::Kind::Context;
            f.context = *c;
        } else
            throw ConfigError("unknown partition field '" + std::string(arg) + "'");
        return by_feature(f);
    }
    throw ConfigError("unknown partition scheme '" + std::string(text) + "'");
}

std::string PartitionScheme::to_string() const {
    if (kind == Kind::ResponseIndex) {
        std::string out = "response-index:";
        for (std::size_t i = 0; i < splitpoints.size(); ++i)
            out += (i ? "," : "") + format_split(splitpoints[i]);
        return out;
    }
    switch (field.kind) {
        case PartitionField::Kind::StudyModule: return "feature:study_module";
        case PartitionField::Kind::Question: return "feature:question";
        case PartitionField::Kind::KC: return "feature:kc";
        case PartitionField::Kind::Context: return "feature:" + std::string(ktrace::to_string(field.context));
    }
    return "feature:?";
}

void PartitionScheme::validate() const {
    if (kind != Kind::ResponseIndex)
        return;
    if (splitpoints.size() < 2 || splitpoints.front() != 0.0 || !std::isinf(splitpoints.back()))
        throw ConfigError("split points must start at 0 and end at inf");
    for (std::size_t i = 1; i < splitpoints.size(); ++i)
        if (!(splitpoints[i] > splitpoints[i - 1]))
            throw ConfigError("split points must be strictly increasing");
}

std::string PartitionScheme::key(const ExampleContext& example, const Interners& names) const {
    if (kind == Kind::ResponseIndex) {
        const double t = example.response_index;
        auto it = std::upper_bound(splitpoints.begin(), splitpoints.end(), t);
        const auto hi = static_cast<std::size_t>(it - splitpoints.begin());
        return format_split(splitpoints[hi - 1]) + "-" + format_split(splitpoints[hi]);
    }
    const InteractionEvent& ev = *example.event;
    switch (field.kind) {
        case PartitionField::Kind::StudyModule:
            return ev.study_module == kNoId ? kMissingKey : names.study_modules.name(ev.study_module);
        case PartitionField::Kind::Question:
            return ev.question == kNoId ? kMissingKey : names.questions.name(ev.question);
        case PartitionField::Kind::KC: {
            if (ev.kcs.empty())
                return kMissingKey;
            std::string out;
            for (Id k : ev.kcs)
                out += (out.empty() ? "" : "+") + names.kcs.name(k);
            return out;
        }
        case PartitionField::Kind::Context: {
            const Id v = ev.context_value(field.context);
            return v == kNoId ? kMissingKey : names.of(field.context).name(v);
        }
    }
    return kMissingKey;
}

// Partitioned model ----------------------------------------------------------

PartitionedModel::PartitionedModel(PartitionScheme scheme, std::map<std::string, Model> models, Model fallback,
                                   std::vector<PartitionInfo> info)
    : scheme_(std::move(scheme)), models_(std::move(models)), fallback_(std::move(fallback)), info_(std::move(info)) {}

const Model& PartitionedModel::route(const std::string& key) const {
    auto it = models_.find(key);
    return it == models_.end() ? fallback_ : it->second;
}

double PartitionedModel::predict_routed(const SparseVector& phi, const ExampleContext& example,
                                        const Interners& names) const {
    return route(scheme_.key(example, names)).predict_proba(phi);
}

Json PartitionedModel::to_json() const {
    Json parts = Json::array();
    for (const auto& p : info_) {
        Json e = {{"key", p.key},
                  {"examples", p.examples},
                  {"single_class", p.single_class},
                  {"routed_to_fallback", p.routed_to_fallback}};
        if (auto it = models_.find(p.key); it != models_.end())
            e["model"] = it->second.to_json();
        parts.push_back(e);
    }
    return {{"version", 1}, {"scheme", scheme_.to_string()}, {"fallback", fallback_.to_json()}, {"partitions", parts}};
}

PartitionedModel PartitionedModel::from_json(const Json& j) {
    std::map<std::string, Model> models;
    std::vector<PartitionInfo> info;
    for (const auto& p : j.at("partitions")) {
        PartitionInfo i{p.at("key").get<std::string>(), p.at("examples").get<std::size_t>(),
                        p.at("single_class").get<bool>(), p.at("routed_to_fallback").get<bool>()};
        if (p.contains("model"))
            models.emplace(i.key, Model::from_json(p.at("model")));
        info.push_back(std::move(i));
    }
    return PartitionedModel(PartitionScheme::parse(j.at("scheme").get<std::string>()), std::move(models),
                            Model::from_json(j.at("fallback")), std::move(info));
}

PartitionedModel fit_partitioned(const Encoder& encoder, const Interners& names, const ExampleSet& train,
                                 const PartitionScheme& scheme, const TrainConfig& config, std::size_t merge_floor) {
    scheme.validate();
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < train.size(); ++i)
        members[scheme.key(train.context[i], names)].push_back(i);

    std::vector<PartitionInfo> info;
    std::vector<std::string> trained;
    for (const auto& [key, rows] : members) {
        std::size_t positives = 0;
        for (auto r : rows)
            positives += train.labels[r];
        PartitionInfo p{key, rows.size(), positives == 0 || positives == rows.size(), rows.size() < merge_floor};
        if (!p.routed_to_fallback)
            trained.push_back(key);
        info.push_back(std::move(p));
    }

    // Task 0 is the fallback, the rest follow the sorted partition keys.
    std::vector<std::optional<Model>> fitted(trained.size() + 1);
    TrainConfig inner = config;
    inner.jobs = 1;
    parallel_for(fitted.size(), config.jobs, [&](std::size_t t) {
        if (t == 0) {
            fitted[0] = train_model(encoder, names, train, inner);
            return;
        }
        ExampleSet part;
        for (auto r : members.at(trained[t - 1])) {
            part.phi.push_back(train.phi[r]);
            part.labels.push_back(train.labels[r]);
            part.context.push_back(train.context[r]);
        }
        fitted[t] = train_model(encoder, names, part, inner);
    });
    std::map<std::string, Model> models;
    for (std::size_t t = 0; t < trained.size(); ++t)
        models.emplace(trained[t], std::move(*fitted[t + 1]));
    return PartitionedModel(scheme, std::move(models), std::move(*fitted[0]), std::move(info));
}

// Base predictors ------------------------------------------------------------

BaseSpec BaseSpec::parse(std::string_view text) {
    BaseSpec spec;
    const auto at = text.find('@');
    if (at != std::string_view::npos) {
        const auto scheme = text.substr(at + 1);
        if (scheme != "none")
            spec.partition = PartitionScheme::parse(scheme);
        text = text.substr(0, at);
    }
    const auto parts = split(text, '|');
    const auto name = parse_model_name(parts.front());
    if (!name)
        throw ConfigError("unknown model '" + std::string(parts.front()) + "'");
    spec.model = *name;
    for (std::size_t i = 1; i < parts.size(); ++i)
        spec.extras.push_back(parse_family(parts[i]));
    return spec;
}

std::string BaseSpec::to_string() const {
    std::string out(ktrace::to_string(model));
    for (const auto& f : extras)
        out += "|" + ktrace::to_string(f);
    if (partition)
        out += "@" + partition->to_string();
    return out;
}

BasePredictor::BasePredictor(BaseSpec spec, Encoder encoder, Model model, std::optional<PartitionedModel> partitioned)
    : spec_(std::move(spec)),
      encoder_(std::move(encoder)),
      model_(std::move(model)),
      partitioned_(std::move(partitioned)) {}

ExampleSet BasePredictor::examples(const Dataset& dataset, std::span<const std::size_t> students, int jobs) const {
    return extract_examples(dataset, students, encoder_, jobs);
}

std::vector<double> BasePredictor::predict(const Dataset& dataset, const ExampleSet& examples) const {
    std::vector<double> out(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i)
        out[i] = partitioned_ ? partitioned_->predict_routed(examples.phi[i], examples.context[i], dataset.names)
                              : model_.predict_proba(examples.phi[i]);
    return out;
}

std::vector<double> BasePredictor::predict(const Dataset& dataset, std::span<const std::size_t> students,
                                           int jobs) const {
    return predict(dataset, examples(dataset, students, jobs));
}

BasePredictor fit_base(const Dataset& dataset, std::span<const std::size_t> students, const BaseSpec& spec,
                       const BaseFitOptions& options) {
    const auto named = resolve(spec.model, dataset.manifest, spec.extras, options.augmented_override);
    auto encoder = Encoder::fit(dataset, students, named.recipe);
    const auto train = extract_examples(dataset, students, encoder, options.jobs);
    TrainConfig config = options.train;
    config.jobs = options.jobs;
    if (spec.partition) {
        auto pm = fit_partitioned(encoder, dataset.names, train, *spec.partition, config, options.merge_floor);
        Model fallback = pm.fallback();
        return BasePredictor(spec, std::move(encoder), std::move(fallback), std::move(pm));
    }
    auto model = train_model(encoder, dataset.names, train, config);
    return BasePredictor(spec, std::move(encoder), std::move(model), std::nullopt);
}

}// namespace ktrace
