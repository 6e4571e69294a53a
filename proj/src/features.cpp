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
#include <ktrace/features.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include <ktrace/parallel.hpp>

namespace ktrace {

namespace {

constexpr std::array<std::string_view, 3> kScopeNames = {"total", "kc", "question"};
constexpr std::array<std::string_view, 2> kTimeOfNames = {"current", "prior"};
constexpr std::array<std::string_view, 4> kDateNames = {"month", "week", "day", "hour"};

struct PlainName {
    FamilyKind kind;
    std::string_view name;
};

constexpr std::array<PlainName, 20> kPlainNames = {{
    {FamilyKind::Bias, "bias"},
    {FamilyKind::StudentOneHot, "student_onehot"},
    {FamilyKind::QuestionOneHot, "question_onehot"},
    {FamilyKind::KCOneHot, "kc_onehot"},
    {FamilyKind::StudyModuleOneHot, "study_module_onehot"},
    {FamilyKind::StudyModuleCounts, "study_module_counts"},
    {FamilyKind::PartAreaCounts, "part_area_counts"},
    {FamilyKind::PrereqIDs, "prereq_ids"},
    {FamilyKind::PrereqCounts, "prereq_counts"},
    {FamilyKind::PostreqIDs, "postreq_ids"},
    {FamilyKind::PostreqCounts, "postreq_counts"},
    {FamilyKind::VideoWatchedCounts, "video_watched_counts"},
    {FamilyKind::VideoSkippedCounts, "video_skipped_counts"},
    {FamilyKind::VideoWatchedTime, "video_watched_time"},
    {FamilyKind::ReadingCounts, "reading_counts"},
    {FamilyKind::ReadingTime, "reading_time"},
    {FamilyKind::HintCounts, "hint_counts"},
    {FamilyKind::HintTime, "hint_time"},
    {FamilyKind::SmoothedAvgCorrect, "smoothed_avg_correct"},
    {FamilyKind::ResponsePattern, "response_pattern"},
}};

template<std::size_t N>
std::optional<std::uint8_t> index_of(const std::array<std::string_view, N>& names, std::string_view text) {
    for (std::size_t i = 0; i < N; ++i)
        if (names[i] == text)
            return static_cast<std::uint8_t>(i);
    return std::nullopt;
}

std::vector<Id> graph_self_nodes(const KCGraph& graph, const InteractionEvent& next) {
    if (graph.level() == GraphLevel::Question)
        return next.question == kNoId ? std::vector<Id>{} : std::vector<Id>{next.question};
    return next.kcs;
}

Json window_json(double days) {
    if (std::isinf(days))
        return "inf";
    return days;
}

double window_from_json(const Json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() != "inf")
            throw ConfigError("time window must be a number of days or \"inf\"");
        return kInfiniteWindow;
    }
    return j.get<double>();
}

}// namespace

// Families -------------------------------------------------------------------

std::string to_string(FeatureFamily f) {
    switch (f.kind) {
        case FamilyKind::Counts: return "counts:" + std::string(kScopeNames.at(f.arg));
        case FamilyKind::TWCounts: return "tw_counts:" + std::string(kScopeNames.at(f.arg));
        case FamilyKind::ElapsedTime: return "elapsed:" + std::string(kTimeOfNames.at(f.arg));
        case FamilyKind::LagTime: return "lag:" + std::string(kTimeOfNames.at(f.arg));
        case FamilyKind::DateTime: return "datetime:" + std::string(kDateNames.at(f.arg));
        case FamilyKind::ContextOneHot: return "context:" + std::string(to_string(static_cast<ContextField>(f.arg)));
        default: break;
    }
    for (const auto& p : kPlainNames)
        if (p.kind == f.kind)
            return std::string(p.name);
    throw ArgumentError("unknown feature family");
}

FeatureFamily parse_family(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        for (const auto& p : kPlainNames)
            if (p.name == text)
                return FeatureFamily::of(p.kind);
        throw ConfigError("unknown feature family '" + std::string(text) + "'");
    }
    const auto head = text.substr(0, colon);
    const auto arg = text.substr(colon + 1);
    std::optional<std::uint8_t> a;
    FamilyKind kind{};
    if (head == "counts" || head == "tw_counts") {
        kind = head == "counts" ? FamilyKind::Counts : FamilyKind::TWCounts;
        a = index_of(kScopeNames, arg);
    } else if (head == "elapsed" || head == "lag") {
        kind = head == "elapsed" ? FamilyKind::ElapsedTime : FamilyKind::LagTime;
        a = index_of(kTimeOfNames, arg);
    } else if (head == "datetime") {
        kind = FamilyKind::DateTime;
        a = index_of(kDateNames, arg);
    } else if (head == "context") {
        kind = FamilyKind::ContextOneHot;
        if (auto f = parse_context_field(arg))
            a = static_cast<std::uint8_t>(*f);
    }
    if (!a)
        throw ConfigError("unknown feature family '" + std::string(text) + "'");
    return {kind, *a};
}

std::vector<FeatureFamily> all_families() {
    std::vector<FeatureFamily> out;
    for (int k = 0; k <= static_cast<int>(FamilyKind::ResponsePattern); ++k) {
        const auto kind = static_cast<FamilyKind>(k);
        std::uint8_t variants = 1;
        switch (kind) {
            case FamilyKind::Counts:
            case FamilyKind::TWCounts: variants = 3; break;
            case FamilyKind::ElapsedTime:
            case FamilyKind::LagTime: variants = 2; break;
            case FamilyKind::DateTime: variants = 4; break;
            case FamilyKind::ContextOneHot: variants = kContextFieldCount; break;
            default: break;
        }
        for (std::uint8_t a = 0; a < variants; ++a)
            out.push_back({kind, a});
    }
    return out;
}

bool permitted(FeatureFamily f, const DatasetManifest& m) {
    switch (f.kind) {
        case FamilyKind::ElapsedTime: return m.has(Capability::ElapsedTime);
        case FamilyKind::LagTime: return m.has(Capability::LagTime);
        case FamilyKind::StudyModuleOneHot:
        case FamilyKind::StudyModuleCounts: return m.has(Capability::StudyModule);
        case FamilyKind::ContextOneHot: return m.has(capability_for(static_cast<ContextField>(f.arg)));
        case FamilyKind::PartAreaCounts: return m.has(Capability::PartArea);
        case FamilyKind::PrereqIDs:
        case FamilyKind::PrereqCounts:
        case FamilyKind::PostreqIDs:
        case FamilyKind::PostreqCounts:
            return m.has(Capability::PrerequisiteGraph) || m.has(Capability::KCHierarchy);
        case FamilyKind::VideoWatchedCounts:
        case FamilyKind::VideoSkippedCounts:
        case FamilyKind::VideoWatchedTime: return m.has(Capability::Videos);
        case FamilyKind::ReadingCounts:
        case FamilyKind::ReadingTime: return m.has(Capability::Reading);
        case FamilyKind::HintCounts:
        case FamilyKind::HintTime: return m.has(Capability::Hints);
        default: return true;
    }
}

// Recipe ---------------------------------------------------------------------

bool Recipe::contains(FeatureFamily f) const { return std::find(families.begin(), families.end(), f) != families.end(); }

void Recipe::add(FeatureFamily f) {
    if (!contains(f))
        families.push_back(f);
}

void Recipe::validate() const {
    std::set<FeatureFamily> seen;
    for (const auto& f : families)
        if (!seen.insert(f).second)
            throw ConfigError("recipe lists " + to_string(f) + " twice");
    if (pattern_length < 1 || pattern_length > static_cast<int>(kMaxPatternLength))
        throw ConfigError("response pattern length must be in 1.." + std::to_string(kMaxPatternLength));
    if (smoothing < 0)
        throw ConfigError("smoothing must be non-negative");
    if (window_days.empty() || !std::isinf(window_days.back()))
        throw ConfigError("time windows must end with an infinite window");
    for (std::size_t i = 0; i < window_days.size(); ++i) {
        if (!(window_days[i] > 0.0))
            throw ConfigError("time windows must be positive");
        if (i > 0 && !(window_days[i] > window_days[i - 1]))
            throw ConfigError("time windows must be strictly increasing");
    }
}

Json Recipe::to_json() const {
    Json fams = Json::array();
    for (const auto& f : families)
        fams.push_back(to_string(f));
    Json windows = Json::array();
    for (double w : window_days)
        windows.push_back(window_json(w));
    return {{"version", 1},
            {"families", fams},
            {"pattern_length", pattern_length},
            {"smoothing", smoothing},
            {"window_days", windows}};
}

Recipe Recipe::from_json(const Json& j) {
    Recipe r;
    const Json& fams = j.is_array() ? j : j.at("families");
    for (const auto& f : fams)
        r.families.push_back(parse_family(f.get<std::string>()));
    if (j.is_object()) {
        r.pattern_length = j.value("pattern_length", r.pattern_length);
        r.smoothing = j.value("smoothing", r.smoothing);
        if (j.contains("window_days")) {
            r.window_days.clear();
            for (const auto& w : j.at("window_days"))
                r.window_days.push_back(window_from_json(w));
        }
    }
    r.validate();
    return r;
}

// Scalar helpers -------------------------------------------------------------

CategoryIndex::CategoryIndex(std::vector<Id> ids) : ids_(std::move(ids)) {
    Id top = 0;
    for (Id id : ids_)
        top = std::max(top, id);
    slots_.assign(ids_.empty() ? 0 : top + std::size_t{1}, -1);
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (slots_[ids_[i]] >= 0)
            throw ArgumentError("duplicate id in category index");
        slots_[ids_[i]] = static_cast<std::int32_t>(i);
    }
}

ElapsedBin elapsed_bins(double seconds) {
    if (!(seconds >= 0.0))
        throw ArgumentError("elapsed time must be non-negative");
    const double capped = std::min(std::floor(seconds), static_cast<double>(kElapsedCap));
    return {static_cast<std::uint32_t>(capped), scale(seconds)};
}

const std::vector<std::uint32_t>& lag_categories() {
    static const std::vector<std::uint32_t> cats = [] {
        std::vector<std::uint32_t> c = {0, 1, 2, 3, 4, 5};
        for (std::uint32_t m = 10; m <= 1440; m += 10)
            c.push_back(m);
        return c;
    }();
    return cats;
}

LagBin lag_bins(double minutes) {
    if (!(minutes >= 0.0))
        throw ArgumentError("lag time must be non-negative");
    const auto& cats = lag_categories();
    const double rounded = std::round(minutes);
    auto it = std::upper_bound(cats.begin(), cats.end(), rounded,
                               [](double v, std::uint32_t c) { return v < static_cast<double>(c); });
    const auto index = static_cast<std::uint32_t>((it - cats.begin()) - 1);
    return {index, cats[index], scale(minutes)};
}

double smoothed_avg_correct(double correct, double attempts, double rbar, int eta) {
    if (eta < 0)
        throw ArgumentError("smoothing parameter must be non-negative");
    const double denom = attempts + eta;
    if (denom == 0.0)
        throw ArgumentError("smoothed average undefined without attempts or smoothing");
    return (correct + eta * rbar) / denom;
}

SparseVector pattern_block(std::uint64_t recent_bits, std::uint32_t recent_count, std::uint32_t n) {
    if (n == 0 || n > kMaxPatternLength)
        throw ArgumentError("pattern length out of range");
    SparseVector out;
    if (recent_count < n)
        return out;
    const auto index = static_cast<std::uint32_t>(recent_bits & ((std::uint64_t{1} << n) - 1));
    out.push_back(index, 1.0);
    return out;
}

CountPair graph_node_counts(const KCGraph& graph, Id node, const StudentState& state) {
    if (graph.level() == GraphLevel::Question)
        return state.question_counts(node);
    CountPair c = state.kc_counts(node);
    if (graph.rollup()) {
        for (Id child : graph.postrequisites(node)) {
            const auto cc = state.kc_counts(child);
            c.correct += cc.correct;
            c.attempts += cc.attempts;
        }
    }
    return c;
}

std::vector<Id> related_nodes(const KCGraph& graph, const InteractionEvent& next, GraphDirection direction) {
    std::vector<Id> out;
    for (Id self : graph_self_nodes(graph, next)) {
        const auto rel = direction == GraphDirection::Pre ? graph.prerequisites(self) : graph.postrequisites(self);
        out.insert(out.end(), rel.begin(), rel.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

SparseVector prereq_blocks(const KCGraph& graph, const CategoryIndex& nodes, const InteractionEvent& next,
                           const StudentState& state, GraphVariant variant, GraphDirection direction) {
    std::vector<SparseEntry> entries;
    for (Id p : related_nodes(graph, next, direction)) {
        const auto slot = nodes.slot(p);
        if (!slot)
            continue;
        if (variant == GraphVariant::IDs) {
            entries.push_back({*slot, 1.0});
        } else {
            const auto c = graph_node_counts(graph, p, state);
            entries.push_back({2 * *slot, scale(c.correct)});
            entries.push_back({2 * *slot + 1, scale(c.attempts)});
        }
    }
    return SparseVector::from_entries(std::move(entries));
}

CalendarParts calendar_parts(std::int64_t timestamp) {
    using namespace std::chrono;
    const sys_seconds tp{seconds{timestamp}};
    const auto day = floor<days>(tp);
    const year_month_day ymd{day};
    const auto hour = static_cast<unsigned>(duration_cast<hours>(tp - day).count());
    const unsigned iso_wd = weekday{day}.iso_encoding();
    // The ISO week belongs to the year of its Thursday.
    const sys_days thursday = day + days{4 - static_cast<int>(iso_wd)};
    const year_month_day thu{thursday};
    const sys_days jan1 = thu.year() / January / 1;
    const auto week = static_cast<unsigned>((thursday - jan1).count() / 7 + 1);
    return {static_cast<unsigned>(ymd.month()), week, iso_wd, hour};
}

// Encoder --------------------------------------------------------------------

namespace {

std::uint32_t block_size(FeatureFamily f, const Recipe& r, std::uint32_t students, std::uint32_t questions,
                         std::uint32_t kcs, std::uint32_t modules,
                         const std::array<CategoryIndex, kContextFieldCount>& context, std::uint32_t nodes) {
    const auto windows = static_cast<std::uint32_t>(r.window_days.size());
    switch (f.kind) {
        case FamilyKind::Bias: return 1;
        case FamilyKind::StudentOneHot: return students;
        case FamilyKind::QuestionOneHot: return questions;
        case FamilyKind::KCOneHot: return kcs;
        case FamilyKind::Counts: return static_cast<CountScope>(f.arg) == CountScope::KC ? 2 * kcs : 2;
        case FamilyKind::TWCounts: return (static_cast<CountScope>(f.arg) == CountScope::KC ? kcs : 1) * 2 * windows;
        case FamilyKind::ElapsedTime: return kElapsedBlock;
        case FamilyKind::LagTime: return kLagBlock;
        case FamilyKind::DateTime: {
            constexpr std::array<std::uint32_t, 4> sizes = {12, 53, 7, 24};
            return sizes.at(f.arg);
        }
        case FamilyKind::StudyModuleOneHot: return modules;
        case FamilyKind::StudyModuleCounts: return 2 * modules;
        case FamilyKind::ContextOneHot: return context.at(f.arg).size();
        case FamilyKind::PartAreaCounts: return 2;
        case FamilyKind::PrereqIDs:
        case FamilyKind::PostreqIDs: return nodes;
        case FamilyKind::PrereqCounts:
        case FamilyKind::PostreqCounts: return 2 * nodes;
        case FamilyKind::SmoothedAvgCorrect: return 1;
        case FamilyKind::ResponsePattern: return std::uint32_t{1} << r.pattern_length;
        default: return 2;// material families: total and current-KC value
    }
}

CategoryIndex index_from(std::set<Id> ids) { return CategoryIndex(std::vector<Id>(ids.begin(), ids.end())); }

void add_pair(std::vector<SparseEntry>& out, std::uint32_t index, double correct, double attempts) {
    out.push_back({index, scale(correct)});
    out.push_back({index + 1, scale(attempts)});
}

void add_windows(std::vector<SparseEntry>& out, std::uint32_t offset, const ResponseHistory* h, std::int64_t now,
                 const std::vector<double>& window_seconds) {
    if (!h)
        return;
    for (std::size_t w = 0; w < window_seconds.size(); ++w) {
        const auto c = h->within(now, window_seconds[w]);
        add_pair(out, offset + static_cast<std::uint32_t>(2 * w), c.correct, c.attempts);
    }
}

void add_lag(std::vector<SparseEntry>& out, std::uint32_t o, std::optional<double> lag_s) {
    if (!lag_s) {
        out.push_back({o + kLagCategories + 1, 1.0});
        return;
    }
    const auto bin = lag_bins(*lag_s / 60.0);
    out.push_back({o + bin.index, 1.0});
    out.push_back({o + kLagCategories, bin.scaled});
}

void add_elapsed(std::vector<SparseEntry>& out, std::uint32_t o, std::optional<double> seconds) {
    if (!seconds)
        return;
    const auto bin = elapsed_bins(*seconds);
    out.push_back({o + bin.bin, 1.0});
    out.push_back({o + kElapsedCap + 1, bin.scaled});
}

void add_material(std::vector<SparseEntry>& out, std::uint32_t o, const MaterialCounter& m, std::span<const Id> kcs,
                  bool minutes) {
    const auto over = m.over(kcs);
    out.push_back({o, scale(minutes ? m.total.minutes : m.total.count)});
    out.push_back({o + 1, scale(minutes ? over.minutes : over.count)});
}

bool needs_graph(FamilyKind k) {
    return k == FamilyKind::PrereqIDs || k == FamilyKind::PrereqCounts || k == FamilyKind::PostreqIDs ||
           k == FamilyKind::PostreqCounts;
}

}// namespace

Encoder Encoder::fit(const Dataset& dataset, std::span<const std::size_t> train_students, const Recipe& recipe) {
    recipe.validate();
    std::vector<std::string> missing;
    for (const auto& f : recipe.families)
        if (!permitted(f, dataset.manifest))
            missing.push_back(to_string(f));
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing)
            list += (list.empty() ? "" : ", ") + m;
        throw ConfigError("dataset '" + dataset.manifest.name + "' does not support: " + list);
    }

    Encoder e;
    e.recipe_ = recipe;
    std::set<Id> students, questions, kcs, modules;
    std::array<std::set<Id>, kContextFieldCount> context;
    double correct = 0.0, responses = 0.0;
    for (std::size_t s : train_students) {
        const auto& log = dataset.students.at(s);
        students.insert(log.student);
        for (const auto& ev : log.events) {
            if (!ev.is_question())
                continue;
            questions.insert(ev.question);
            kcs.insert(ev.kcs.begin(), ev.kcs.end());
            if (ev.study_module != kNoId)
                modules.insert(ev.study_module);
            for (std::size_t f = 0; f < kContextFieldCount; ++f)
                if (ev.context[f] != kNoId)
                    context[f].insert(ev.context[f]);
            correct += ev.correct.value_or(false) ? 1.0 : 0.0;
            responses += 1.0;
        }
    }
    e.students_ = index_from(std::move(students));
    e.questions_ = index_from(std::move(questions));
    e.kcs_ = index_from(std::move(kcs));
    e.modules_ = index_from(std::move(modules));
    for (std::size_t f = 0; f < kContextFieldCount; ++f)
        e.context_[f] = index_from(std::move(context[f]));
    e.mean_correct_ = responses > 0.0 ? correct / responses : 0.0;

    const bool graph_needed =
        std::any_of(recipe.families.begin(), recipe.families.end(), [](FeatureFamily f) { return needs_graph(f.kind); });
    if (graph_needed) {
        if (!dataset.graph)
            throw ConfigError("prerequisite features require a KC graph");
        e.graph_ = std::make_shared<KCGraph>(*dataset.graph);
        e.graph_nodes_ = CategoryIndex(e.graph_->nodes());
    }
    e.layout();
    return e;
}

void Encoder::layout() {
    blocks_.clear();
    window_seconds_.clear();
    for (double d : recipe_.window_days)
        window_seconds_.push_back(d * 86400.0);
    std::uint32_t offset = 0;
    for (const auto& f : recipe_.families) {
        const auto size = block_size(f, recipe_, students_.size(), questions_.size(), kcs_.size(), modules_.size(),
                                     context_, graph_nodes_.size());
        blocks_.push_back({f, offset, size});
        offset += size;
    }
    dimension_ = offset;
}

std::optional<FeatureBlock> Encoder::block(FeatureFamily family) const {
    for (const auto& b : blocks_)
        if (b.family == family)
            return b;
    return std::nullopt;
}

std::vector<std::uint32_t> Encoder::unpenalized() const {
    if (auto b = block(FeatureFamily::of(FamilyKind::Bias)))
        return {b->offset};
    return {};
}

SparseVector Encoder::emit(const StudentState& state, const InteractionEvent& next) const {
    std::vector<SparseEntry> out;
    const std::int64_t now = next.timestamp;
    for (const auto& b : blocks_) {
        const std::uint32_t o = b.offset;
        switch (b.family.kind) {
            case FamilyKind::Bias: out.push_back({o, 1.0}); break;
            case FamilyKind::StudentOneHot:
                if (auto s = students_.slot(next.student))
                    out.push_back({o + *s, 1.0});
                break;
            case FamilyKind::QuestionOneHot:
                if (auto s = questions_.slot(next.question))
                    out.push_back({o + *s, 1.0});
                break;
            case FamilyKind::KCOneHot:
                for (Id k : next.kcs)
                    if (auto s = kcs_.slot(k))
                        out.push_back({o + *s, 1.0});
                break;
            case FamilyKind::Counts:
                switch (static_cast<CountScope>(b.family.arg)) {
                    case CountScope::Total: {
                        const auto c = state.total().all();
                        add_pair(out, o, c.correct, c.attempts);
                        break;
                    }
                    case CountScope::KC:
                        for (Id k : next.kcs)
                            if (auto s = kcs_.slot(k)) {
                                const auto c = state.kc_counts(k);
                                add_pair(out, o + 2 * *s, c.correct, c.attempts);
                            }
                        break;
                    case CountScope::Question: {
                        const auto c = state.question_counts(next.question);
                        add_pair(out, o, c.correct, c.attempts);
                        break;
                    }
                }
                break;
            case FamilyKind::TWCounts: {
                const auto span = static_cast<std::uint32_t>(2 * window_seconds_.size());
                switch (static_cast<CountScope>(b.family.arg)) {
                    case CountScope::Total: add_windows(out, o, &state.total(), now, window_seconds_); break;
                    case CountScope::KC:
                        for (Id k : next.kcs)
                            if (auto s = kcs_.slot(k))
                                add_windows(out, o + *s * span, state.kc(k), now, window_seconds_);
                        break;
                    case CountScope::Question:
                        add_windows(out, o, state.question(next.question), now, window_seconds_);
                        break;
                }
                break;
            }
            case FamilyKind::ElapsedTime:
                add_elapsed(out, o,
                            static_cast<TimeOf>(b.family.arg) == TimeOf::Current ? next.elapsed_s
                                                                                 : state.prior_elapsed_s());
                break;
            case FamilyKind::LagTime:
                add_lag(out, o, static_cast<TimeOf>(b.family.arg) == TimeOf::Current ? next.lag_s : state.prior_lag_s());
                break;
            case FamilyKind::DateTime: {
                const auto parts = calendar_parts(now);
                const std::array<unsigned, 4> slot = {parts.month - 1, parts.iso_week - 1, parts.weekday - 1,
                                                      parts.hour};
                out.push_back({o + slot.at(b.family.arg), 1.0});
                break;
            }
            case FamilyKind::StudyModuleOneHot:
                if (auto s = modules_.slot(next.study_module))
                    out.push_back({o + *s, 1.0});
                break;
            case FamilyKind::StudyModuleCounts:
                if (auto s = modules_.slot(next.study_module)) {
                    const auto c = state.study_module_counts(next.study_module);
                    add_pair(out, o + 2 * *s, c.correct, c.attempts);
                }
                break;
            case FamilyKind::ContextOneHot:
                if (auto s = context_.at(b.family.arg).slot(next.context[b.family.arg]))
                    out.push_back({o + *s, 1.0});
                break;
            case FamilyKind::PartAreaCounts:
                if (Id part = next.context_value(ContextField::PartArea); part != kNoId) {
                    const auto c = state.part_area_counts(part);
                    add_pair(out, o, c.correct, c.attempts);
                }
                break;
            case FamilyKind::PrereqIDs:
            case FamilyKind::PrereqCounts:
            case FamilyKind::PostreqIDs:
            case FamilyKind::PostreqCounts: {
                const auto kind = b.family.kind;
                const auto variant = (kind == FamilyKind::PrereqIDs || kind == FamilyKind::PostreqIDs)
                                         ? GraphVariant::IDs
                                         : GraphVariant::Counts;
                const auto direction = (kind == FamilyKind::PrereqIDs || kind == FamilyKind::PrereqCounts)
                                           ? GraphDirection::Pre
                                           : GraphDirection::Post;
                const auto block = prereq_blocks(*graph_, graph_nodes_, next, state, variant, direction);
                for (const auto& e : block.entries())
                    out.push_back({o + e.index, e.value});
                break;
            }
            case FamilyKind::VideoWatchedCounts: add_material(out, o, state.videos_watched(), next.kcs, false); break;
            case FamilyKind::VideoSkippedCounts: add_material(out, o, state.videos_skipped(), next.kcs, false); break;
            case FamilyKind::VideoWatchedTime: add_material(out, o, state.videos_watched(), next.kcs, true); break;
            case FamilyKind::ReadingCounts: add_material(out, o, state.reading(), next.kcs, false); break;
            case FamilyKind::ReadingTime: add_material(out, o, state.reading(), next.kcs, true); break;
            case FamilyKind::HintCounts: add_material(out, o, state.hints(), next.kcs, false); break;
            case FamilyKind::HintTime: add_material(out, o, state.hints(), next.kcs, true); break;
            case FamilyKind::SmoothedAvgCorrect: {
                const auto c = state.total().all();
                out.push_back({o, smoothed_avg_correct(c.correct, c.attempts, mean_correct_, recipe_.smoothing)});
                break;
            }
            case FamilyKind::ResponsePattern: {
                const auto block = pattern_block(state.recent_bits(), state.recent_count(),
                                                 static_cast<std::uint32_t>(recipe_.pattern_length));
                for (const auto& e : block.entries())
                    out.push_back({o + e.index, e.value});
                break;
            }
        }
    }
    return SparseVector::from_entries(std::move(out));
}

namespace {

Json names_of(const CategoryIndex& index, const Vocabulary& vocab) {
    Json out = Json::array();
    for (Id id : index.ids())
        out.push_back(vocab.name(id));
    return out;
}

CategoryIndex index_of_names(const Json& names, Vocabulary& vocab) {
    std::vector<Id> ids;
    for (const auto& n : names)
        ids.push_back(vocab.intern(n.get<std::string>()));
    return CategoryIndex(std::move(ids));
}

}// namespace

Json Encoder::to_json(const Interners& names) const {
    Json context = Json::object();
    for (std::size_t f = 0; f < kContextFieldCount; ++f)
        if (context_[f].size() > 0)
            context[std::string(to_string(static_cast<ContextField>(f)))] =
                names_of(context_[f], names.context[f]);
    Json blocks = Json::array();
    for (const auto& b : blocks_)
        blocks.push_back({{"family", to_string(b.family)}, {"offset", b.offset}, {"size", b.size}});
    Json j = {{"version", 1},
              {"recipe", recipe_.to_json()},
              {"mean_correct", mean_correct_},
              {"dimension", dimension_},
              {"blocks", blocks},
              {"students", names_of(students_, names.students)},
              {"questions", names_of(questions_, names.questions)},
              {"kcs", names_of(kcs_, names.kcs)},
              {"study_modules", names_of(modules_, names.study_modules)},
              {"context", context}};
    if (graph_) {
        const auto& vocab = graph_->level() == GraphLevel::Question ? names.questions : names.kcs;
        j["graph_nodes"] = names_of(graph_nodes_, vocab);
    }
    return j;
}

Encoder Encoder::from_json(const Json& j, Interners& names, const std::optional<KCGraph>& graph) {
    if (j.at("version").get<int>() != 1)
        throw ConfigError("unsupported encoder version");
    Encoder e;
    e.recipe_ = Recipe::from_json(j.at("recipe"));
    e.mean_correct_ = j.at("mean_correct").get<double>();
    e.students_ = index_of_names(j.at("students"), names.students);
    e.questions_ = index_of_names(j.at("questions"), names.questions);
    e.kcs_ = index_of_names(j.at("kcs"), names.kcs);
    e.modules_ = index_of_names(j.at("study_modules"), names.study_modules);
    for (const auto& [field, values] : j.at("context").items()) {
        const auto f = parse_context_field(field);
        if (!f)
            throw ConfigError("unknown context field '" + field + "'");
        e.context_[static_cast<std::size_t>(*f)] = index_of_names(values, names.of(*f));
    }
    if (j.contains("graph_nodes")) {
        if (!graph)
            throw ConfigError("encoder uses a KC graph but none was supplied");
        e.graph_ = std::make_shared<KCGraph>(*graph);
        auto& vocab = graph->level() == GraphLevel::Question ? names.questions : names.kcs;
        e.graph_nodes_ = index_of_names(j.at("graph_nodes"), vocab);
    }
    e.layout();
    if (e.dimension_ != j.at("dimension").get<std::uint32_t>())
        throw ConfigError("encoder dimension does not match its vocabularies");
    return e;
}

bool operator==(const Encoder& a, const Encoder& b) {
    auto same = [](const CategoryIndex& x, const CategoryIndex& y) { return x.ids() == y.ids(); };
    if (a.recipe_.to_json() != b.recipe_.to_json() || a.mean_correct_ != b.mean_correct_ ||
        a.dimension_ != b.dimension_)
        return false;
    if (!same(a.students_, b.students_) || !same(a.questions_, b.questions_) || !same(a.kcs_, b.kcs_) ||
        !same(a.modules_, b.modules_) || !same(a.graph_nodes_, b.graph_nodes_))
        return false;
    for (std::size_t f = 0; f < kContextFieldCount; ++f)
        if (!same(a.context_[f], b.context_[f]))
            return false;
    return true;
}

// Examples -------------------------------------------------------------------

ExampleSet extract_examples(const Dataset& dataset, std::span<const std::size_t> students, const Encoder& encoder,
                            int jobs) {
    std::vector<ExampleSet> parts(students.size());
    parallel_for(students.size(), jobs, [&](std::size_t i) {
        const std::size_t s = students[i];
        const auto& log = dataset.students.at(s);
        StudentState state;
        ExampleSet& part = parts[i];
        std::uint32_t t = 0;
        for (const auto& ev : log.events) {
            if (ev.is_question()) {
                part.phi.push_back(encoder.emit(state, ev));
                part.labels.push_back(*ev.correct ? 1 : 0);
                part.context.push_back({static_cast<std::uint32_t>(s), t++, &ev});
            }
            state.apply(ev);
        }
    });
    ExampleSet out;
    std::size_t total = 0;
    for (const auto& p : parts)
        total += p.size();
    out.phi.reserve(total);
    out.labels.reserve(total);
    out.context.reserve(total);
    for (auto& p : parts) {
        std::move(p.phi.begin(), p.phi.end(), std::back_inserter(out.phi));
        out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
        out.context.insert(out.context.end(), p.context.begin(), p.context.end());
    }
    return out;
}

}// namespace ktrace
