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
#include <ktrace/core.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace ktrace {

ParseError::ParseError(std::size_t line, const std::string& what)
    : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

Id Vocabulary::intern(std::string_view name) {
    auto [it, inserted] = ids_.try_emplace(std::string(name), static_cast<Id>(names_.size()));
    if (inserted)
        names_.emplace_back(name);
    return it->second;
}

std::optional<Id> Vocabulary::find(std::string_view name) const {
    auto it = ids_.find(std::string(name));
    if (it == ids_.end())
        return std::nullopt;
    return it->second;
}

const std::string& Vocabulary::name(Id id) const {
    if (id >= names_.size())
        throw std::out_of_range("vocabulary id " + std::to_string(id) + " out of range");
    return names_[id];
}

namespace {

constexpr std::array<std::string_view, 5> kEventKindNames = {"question_response", "video_watch", "video_skip",
                                                             "reading", "hint_use"};

constexpr std::array<std::string_view, kContextFieldCount> kContextNames = {
    "teacher_group", "school", "course", "topic", "difficulty", "bundle",
    "part_area", "platform", "age", "gender", "social_support"};

constexpr std::array<std::string_view, kCapabilityCount> kCapabilityNames = {
    "elapsed_time", "lag_time", "study_module", "prerequisite_graph", "kc_hierarchy", "bundle",
    "videos", "reading", "hints", "personal", "platform", "difficulty",
    "teacher_group", "school", "course", "topic", "part_area"};

template<typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::string_view, N>& names, std::string_view text) {
    for (std::size_t i = 0; i < N; ++i)
        if (names[i] == text)
            return static_cast<E>(i);
    return std::nullopt;
}

}// namespace

std::string_view to_string(EventKind kind) { return kEventKindNames[static_cast<std::size_t>(kind)]; }

std::optional<EventKind> parse_event_kind(std::string_view text) {
    if (auto k = lookup<EventKind>(kEventKindNames, text))
        return k;
    // Accept the enum spelling as well.
    if (text == "QuestionResponse")
        return EventKind::QuestionResponse;
    if (text == "VideoWatch")
        return EventKind::VideoWatch;
    if (text == "VideoSkip")
        return EventKind::VideoSkip;
    if (text == "Reading")
        return EventKind::Reading;
    if (text == "HintUse")
        return EventKind::HintUse;
    return std::nullopt;
}

std::string_view to_string(ContextField field) { return kContextNames[static_cast<std::size_t>(field)]; }

std::optional<ContextField> parse_context_field(std::string_view text) {
    return lookup<ContextField>(kContextNames, text);
}

std::string_view to_string(Capability cap) { return kCapabilityNames[static_cast<std::size_t>(cap)]; }

std::optional<Capability> parse_capability(std::string_view text) {
    return lookup<Capability>(kCapabilityNames, text);
}

Capability capability_for(ContextField field) {
    switch (field) {
        case ContextField::TeacherGroup: return Capability::TeacherGroup;
        case ContextField::School: return Capability::School;
        case ContextField::Course: return Capability::Course;
        case ContextField::Topic: return Capability::Topic;
        case ContextField::Difficulty: return Capability::Difficulty;
        case ContextField::Bundle: return Capability::Bundle;
        case ContextField::PartArea: return Capability::PartArea;
        case ContextField::Platform: return Capability::Platform;
        case ContextField::Age:
        case ContextField::Gender:
        case ContextField::SocialSupport: return Capability::Personal;
    }
    throw ArgumentError("unknown context field");
}

Json DatasetManifest::to_json() const {
    Json caps = Json::object();
    for (std::size_t i = 0; i < kCapabilityCount; ++i)
        caps[std::string(kCapabilityNames[i])] = capabilities.test(i);
    Json j = {{"version", 1}, {"name", name}, {"capabilities", caps}};
    if (kc_graph)
        j["kc_graph"] = *kc_graph;
    return j;
}

DatasetManifest DatasetManifest::from_json(const Json& j) {
    DatasetManifest m;
    m.name = j.value("name", std::string{});
    if (j.contains("capabilities")) {
        for (const auto& [key, value] : j.at("capabilities").items()) {
            auto cap = parse_capability(key);
            if (!cap)
                throw ConfigError("unknown capability '" + key + "' in manifest");
            if (value.get<bool>())
                m.enable(*cap);
        }
    }
    if (j.contains("kc_graph") && !j.at("kc_graph").is_null())
        m.kc_graph = j.at("kc_graph").get<std::string>();
    return m;
}

// KCGraph -----------------------------------------------------------------------

namespace {

void insert_sorted(std::vector<Id>& v, Id x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it == v.end() || *it != x)
        v.insert(it, x);
}

}// namespace

void KCGraph::add_edge(Id pre, Id post) {
    if (pre == post)
        throw SchemaError("prerequisite graph self-edge on node " + std::to_string(pre));
    insert_sorted(post_[pre], post);
    insert_sorted(pre_[post], pre);
}

std::span<const Id> KCGraph::prerequisites(Id node) const {
    auto it = pre_.find(node);
    if (it == pre_.end())
        return {};
    return it->second;
}

std::span<const Id> KCGraph::postrequisites(Id node) const {
    auto it = post_.find(node);
    if (it == post_.end())
        return {};
    return it->second;
}

std::vector<std::pair<Id, Id>> KCGraph::edges() const {
    std::vector<std::pair<Id, Id>> out;
    for (const auto& [pre, posts] : post_)
        for (Id post : posts)
            out.emplace_back(pre, post);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Id> KCGraph::nodes() const {
    std::vector<Id> out;
    for (const auto& [pre, posts] : post_) {
        out.push_back(pre);
        out.insert(out.end(), posts.begin(), posts.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::size_t KCGraph::edge_count() const {
    std::size_t n = 0;
    for (const auto& [pre, posts] : post_)
        n += posts.size();
    return n;
}

KCGraph KCGraph::reversed() const {
    KCGraph g(level_, rollup_);
    g.pre_ = post_;
    g.post_ = pre_;
    return g;
}

KCGraph KCGraph::from_ontology(const std::vector<std::pair<Id, Id>>& parent_of) {
    std::vector<Id> parents;
    for (const auto& [child, parent] : parent_of)
        parents.push_back(parent);
    std::sort(parents.begin(), parents.end());
    KCGraph g(GraphLevel::KC, true);
    for (const auto& [child, parent] : parent_of)
        if (!std::binary_search(parents.begin(), parents.end(), child))
            g.add_edge(parent, child);
    return g;
}

// SparseVector -------------------------------------------------------------------

SparseVector SparseVector::from_entries(std::vector<SparseEntry> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; });
    SparseVector v;
    v.entries_.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (i > 0 && entries[i].index == entries[i - 1].index)
            throw ArgumentError("duplicate sparse index " + std::to_string(entries[i].index));
        if (entries[i].value != 0.0)
            v.entries_.push_back(entries[i]);
    }
    return v;
}

void SparseVector::push_back(std::uint32_t index, double value) {
    if (!entries_.empty() && index <= entries_.back().index)
        throw ArgumentError("sparse indices must be strictly increasing");
    if (value != 0.0)
        entries_.push_back({index, value});
}

double SparseVector::value_at(std::uint32_t index) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                               [](const SparseEntry& e, std::uint32_t i) { return e.index < i; });
    return it != entries_.end() && it->index == index ? it->value : 0.0;
}

Json SparseVector::to_json() const {
    Json entries = Json::array();
    for (const auto& e : entries_)
        entries.push_back(Json::array({e.index, e.value}));
    return {{"version", 1}, {"entries", entries}};
}

SparseVector SparseVector::from_json(const Json& j) {
    if (j.value("version", 0) != 1)
        throw SchemaError("unsupported sparse vector version");
    std::vector<SparseEntry> entries;
    for (const auto& e : j.at("entries"))
        entries.push_back({e.at(0).get<std::uint32_t>(), e.at(1).get<double>()});
    return from_entries(std::move(entries));
}

double scale(double x) {
    if (!(x >= 0.0))
        throw ArgumentError("scale() requires a non-negative argument");
    return std::log1p(x);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex_digest(std::string_view bytes) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::uint64_t h = fnv1a(bytes);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4)
        out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    return out;
}

double dot(const SparseVector& v, std::span<const double> w) {
    double sum = 0.0;
    for (const auto& e : v.entries()) {
        if (e.index >= w.size())
            throw std::out_of_range("sparse index " + std::to_string(e.index) + " outside weight vector of length " +
                                    std::to_string(w.size()));
        sum += e.value * w[e.index];
    }
    return sum;
}

// Dataset -----------------------------------------------------------------------

std::size_t StudentLog::response_count() const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [](const InteractionEvent& e) { return e.is_question(); }));
}

std::size_t Dataset::response_count() const {
    std::size_t n = 0;
    for (const auto& s : students)
        n += s.response_count();
    return n;
}

std::size_t Dataset::event_count() const {
    std::size_t n = 0;
    for (const auto& s : students)
        n += s.events.size();
    return n;
}

}// namespace ktrace
