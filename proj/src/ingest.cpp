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
#include <ktrace/ingest.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <ktrace/random.hpp>

namespace ktrace {

namespace {

enum Column : std::size_t {
    kStudent,
    kTimestamp,
    kKind,
    kQuestion,
    kKcs,
    kCorrect,
    kElapsed,
    kStudyModule,
    kTeacherGroup,
    kSchool,
    kCourse,
    kTopic,
    kBundle,
    kPartArea,
    kPlatform,
    kDifficulty,
    kHintCount,
    kConsumption,
    kAge,
    kGender,
    kSocialSupport,
    kColumnCount,
};

constexpr std::array<std::pair<Column, ContextField>, kContextFieldCount> kContextColumns = {{
    {kTeacherGroup, ContextField::TeacherGroup},
    {kSchool, ContextField::School},
    {kCourse, ContextField::Course},
    {kTopic, ContextField::Topic},
    {kDifficulty, ContextField::Difficulty},
    {kBundle, ContextField::Bundle},
    {kPartArea, ContextField::PartArea},
    {kPlatform, ContextField::Platform},
    {kAge, ContextField::Age},
    {kGender, ContextField::Gender},
    {kSocialSupport, ContextField::SocialSupport},
}};

// Splits one CSV record; double quotes may wrap a cell and "" escapes a quote.
std::vector<std::string> split_csv(std::string_view line, std::size_t line_no) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else {
            cell.push_back(c);
        }
    }
    if (quoted)
        throw ParseError(line_no, "unterminated quoted cell");
    cells.push_back(std::move(cell));
    return cells;
}

double parse_real(const std::string& text, std::size_t line_no, std::string_view column) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
        throw ParseError(line_no, "invalid number '" + text + "' in column " + std::string(column));
    return value;
}

double parse_non_negative(const std::string& text, std::size_t line_no, std::string_view column) {
    const double v = parse_real(text, line_no, column);
    if (v < 0.0)
        throw ParseError(line_no, "negative value in column " + std::string(column));
    return v;
}

void require(const DatasetManifest& m, Capability cap, std::size_t line_no, std::string_view what) {
    if (!m.has(cap))
        throw SchemaError("line " + std::to_string(line_no) + ": " + std::string(what) +
                          " present but manifest does not declare capability '" + std::string(to_string(cap)) + "'");
}

std::string format_real(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string join_names(const std::vector<Id>& ids, const Vocabulary& vocab, char sep) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i)
            out.push_back(sep);
        out += vocab.name(ids[i]);
    }
    return out;
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}// namespace

Dataset load_events(std::istream& in, const DatasetManifest& manifest) {
    Dataset d;
    d.manifest = manifest;

    std::string line;
    std::size_t line_no = 0;
    std::array<std::size_t, kColumnCount> position{};
    std::size_t header_width = 0;
    {
        if (!std::getline(in, line))
            throw ParseError(1, "missing header row");
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        auto header = split_csv(line, line_no);
        header_width = header.size();
        for (std::size_t c = 0; c < kColumnCount; ++c) {
            auto it = std::find(header.begin(), header.end(), kCanonicalColumns[c]);
            if (it == header.end())
                throw ParseError(line_no, "header lacks column '" + std::string(kCanonicalColumns[c]) + "'");
            position[c] = static_cast<std::size_t>(it - header.begin());
        }
    }

    std::vector<std::vector<InteractionEvent>> per_student;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        auto cells = split_csv(line, line_no);
        if (cells.size() != header_width)
            throw ParseError(line_no, "expected " + std::to_string(header_width) + " cells, found " +
                                          std::to_string(cells.size()));
        auto cell = [&](Column c) -> const std::string& { return cells[position[c]]; };

        InteractionEvent ev;
        if (cell(kStudent).empty())
            throw ParseError(line_no, "empty student_id");
        ev.student = d.names.students.intern(cell(kStudent));
        ev.timestamp = static_cast<std::int64_t>(std::floor(parse_real(cell(kTimestamp), line_no, "timestamp")));

        auto kind = parse_event_kind(cell(kKind));
        if (!kind)
            throw ParseError(line_no, "unknown event_kind '" + cell(kKind) + "'");
        ev.kind = *kind;
        switch (ev.kind) {
            case EventKind::VideoWatch:
            case EventKind::VideoSkip: require(manifest, Capability::Videos, line_no, "video event"); break;
            case EventKind::Reading: require(manifest, Capability::Reading, line_no, "reading event"); break;
            case EventKind::HintUse: require(manifest, Capability::Hints, line_no, "hint event"); break;
            case EventKind::QuestionResponse: break;
        }

        if (!cell(kQuestion).empty())
            ev.question = d.names.questions.intern(cell(kQuestion));
        if (!cell(kKcs).empty()) {
            std::string_view rest = cell(kKcs);
            while (!rest.empty()) {
                auto cut = rest.find(';');
                auto token = rest.substr(0, cut);
                if (token.empty())
                    throw ParseError(line_no, "empty KC id in kc_ids");
                ev.kcs.push_back(d.names.kcs.intern(token));
                rest = cut == std::string_view::npos ? std::string_view{} : rest.substr(cut + 1);
            }
            std::sort(ev.kcs.begin(), ev.kcs.end());
            ev.kcs.erase(std::unique(ev.kcs.begin(), ev.kcs.end()), ev.kcs.end());
        }
        if (const auto& c = cell(kCorrect); !c.empty()) {
            if (c == "1" || c == "true" || c == "True")
                ev.correct = true;
            else if (c == "0" || c == "false" || c == "False")
                ev.correct = false;
            else
                throw ParseError(line_no, "invalid correct value '" + c + "'");
        }
        if (ev.is_question()) {
            if (ev.question == kNoId)
                throw ParseError(line_no, "question response without question_id");
            if (ev.kcs.empty())
                throw ParseError(line_no, "question response without kc_ids");
            if (!ev.correct)
                throw ParseError(line_no, "question response without correct");
        }
        if (const auto& c = cell(kElapsed); !c.empty()) {
            require(manifest, Capability::ElapsedTime, line_no, "elapsed_time_s");
            ev.elapsed_s = parse_non_negative(c, line_no, "elapsed_time_s");
        }
        if (const auto& c = cell(kStudyModule); !c.empty()) {
            require(manifest, Capability::StudyModule, line_no, "study_module");
            ev.study_module = d.names.study_modules.intern(c);
        }
        for (const auto& [column, field] : kContextColumns) {
            if (const auto& c = cell(column); !c.empty()) {
                require(manifest, capability_for(field), line_no, kCanonicalColumns[column]);
                ev.context[static_cast<std::size_t>(field)] = d.names.of(field).intern(c);
            }
        }
        if (const auto& c = cell(kHintCount); !c.empty()) {
            require(manifest, Capability::Hints, line_no, "hint_count");
            const double v = parse_non_negative(c, line_no, "hint_count");
            if (v != std::floor(v))
                throw ParseError(line_no, "hint_count must be an integer");
            ev.hint_count = static_cast<std::int32_t>(v);
        }
        if (const auto& c = cell(kConsumption); !c.empty()) {
            if (!manifest.has(Capability::Videos) && !manifest.has(Capability::Reading) &&
                !manifest.has(Capability::Hints))
                throw SchemaError("line " + std::to_string(line_no) +
                                  ": consumption_minutes present but manifest declares no videos, reading or hints");
            ev.consumption_minutes = parse_non_negative(c, line_no, "consumption_minutes");
        }

        if (ev.student >= per_student.size())
            per_student.resize(ev.student + std::size_t{1});
        per_student[ev.student].push_back(std::move(ev));
    }

    d.students.reserve(per_student.size());
    for (std::size_t s = 0; s < per_student.size(); ++s) {
        StudentLog log{static_cast<Id>(s), std::move(per_student[s])};
        std::stable_sort(log.events.begin(), log.events.end(),
                         [](const InteractionEvent& a, const InteractionEvent& b) { return a.timestamp < b.timestamp; });
        d.quality.clamped_lags += derive_lag_times(log.events);
        d.students.push_back(std::move(log));
    }
    return d;
}

Dataset load_events(const std::filesystem::path& path, const DatasetManifest& manifest) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open " + path.string());
    return load_events(in, manifest);
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open manifest " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigError("manifest " + path.string() + ": " + e.what());
    }
    return DatasetManifest::from_json(j);
}

Dataset load_dataset(const std::filesystem::path& csv, const std::filesystem::path& manifest_path) {
    auto manifest = load_manifest(manifest_path);
    Dataset d = load_events(csv, manifest);
    if (manifest.kc_graph) {
        if (!manifest.has(Capability::PrerequisiteGraph) && !manifest.has(Capability::KCHierarchy))
            throw SchemaError("manifest names a KC graph but declares neither prerequisite_graph nor kc_hierarchy");
        auto graph_path = manifest_path.parent_path() / *manifest.kc_graph;
        std::ifstream in(graph_path);
        if (!in)
            throw ConfigError("cannot open KC graph " + graph_path.string());
        d.graph = load_graph(Json::parse(in), d.names);
    }
    return d;
}

KCGraph load_graph(const Json& j, Interners& names) {
    const auto level_text = j.value("level", std::string("kc"));
    GraphLevel level;
    if (level_text == "kc")
        level = GraphLevel::KC;
    else if (level_text == "question")
        level = GraphLevel::Question;
    else
        throw SchemaError("unknown graph level '" + level_text + "'");
    Vocabulary& vocab = level == GraphLevel::KC ? names.kcs : names.questions;

    if (j.contains("ontology")) {
        if (level != GraphLevel::KC)
            throw SchemaError("ontology graphs are KC-level");
        std::vector<std::pair<Id, Id>> parent_of;
        for (const auto& [child, parent] : j.at("ontology").items())
            parent_of.emplace_back(vocab.intern(child), vocab.intern(parent.get<std::string>()));
        std::sort(parent_of.begin(), parent_of.end());
        return KCGraph::from_ontology(parent_of);
    }
    KCGraph g(level, j.value("rollup", false));
    for (const auto& edge : j.at("edges")) {
        const auto pre = edge.at(0).get<std::string>();
        const auto post = edge.at(1).get<std::string>();
        g.add_edge(vocab.intern(pre), vocab.intern(post));
    }
    return g;
}

Json graph_to_json(const KCGraph& graph, const Interners& names) {
    const Vocabulary& vocab = graph.level() == GraphLevel::KC ? names.kcs : names.questions;
    Json edges = Json::array();
    for (const auto& [pre, post] : graph.edges())
        edges.push_back(Json::array({vocab.name(pre), vocab.name(post)}));
    return {{"level", graph.level() == GraphLevel::KC ? "kc" : "question"}, {"rollup", graph.rollup()}, {"edges", edges}};
}

void write_events(std::ostream& out, const Dataset& d) {
    for (std::size_t c = 0; c < kColumnCount; ++c)
        out << (c ? "," : "") << kCanonicalColumns[c];
    out << '\n';
    for (const auto& log : d.students) {
        for (const auto& ev : log.events) {
            std::array<std::string, kColumnCount> row;
            row[kStudent] = d.names.students.name(ev.student);
            row[kTimestamp] = std::to_string(ev.timestamp);
            row[kKind] = std::string(to_string(ev.kind));
            if (ev.question != kNoId)
                row[kQuestion] = d.names.questions.name(ev.question);
            row[kKcs] = join_names(ev.kcs, d.names.kcs, ';');
            if (ev.correct)
                row[kCorrect] = *ev.correct ? "1" : "0";
            if (ev.elapsed_s)
                row[kElapsed] = format_real(*ev.elapsed_s);
            if (ev.study_module != kNoId)
                row[kStudyModule] = d.names.study_modules.name(ev.study_module);
            for (const auto& [column, field] : kContextColumns)
                if (Id v = ev.context_value(field); v != kNoId)
                    row[column] = d.names.of(field).name(v);
            if (ev.hint_count)
                row[kHintCount] = std::to_string(*ev.hint_count);
            if (ev.consumption_minutes)
                row[kConsumption] = format_real(*ev.consumption_minutes);
            for (std::size_t c = 0; c < kColumnCount; ++c)
                out << (c ? "," : "") << csv_cell(row[c]);
            out << '\n';
        }
    }
}

Dataset filter_students(Dataset dataset, std::size_t min_responses) {
    if (min_responses < 1)
        throw ConfigError("min_responses must be at least 1");
    std::erase_if(dataset.students,
                  [&](const StudentLog& log) { return log.response_count() < min_responses; });
    return dataset;
}

Json SquashResult::mapping_json() const {
    Json j = Json::object();
    for (const auto& [artificial, originals] : mapping)
        j[artificial] = originals;
    return j;
}

SquashResult squash_multi_kc(Dataset dataset) {
    const Vocabulary old = dataset.names.kcs;
    Vocabulary fresh;
    std::map<std::vector<Id>, Id> id_of_set;
    SquashResult result;

    auto artificial_for = [&](const std::vector<Id>& set) {
        auto it = id_of_set.find(set);
        if (it != id_of_set.end())
            return it->second;
        std::vector<std::string> members;
        for (Id k : set)
            members.push_back(old.name(k));
        std::sort(members.begin(), members.end());
        std::string name;
        for (std::size_t i = 0; i < members.size(); ++i)
            name += (i ? "+" : "") + members[i];
        const Id id = fresh.intern(name);
        id_of_set.emplace(set, id);
        result.mapping.emplace(name, std::move(members));
        return id;
    };

    for (auto& log : dataset.students) {
        for (auto& ev : log.events) {
            if (ev.is_question() && ev.kcs.empty())
                throw SchemaError("question response of student '" + dataset.names.students.name(log.student) +
                                  "' has no KC ids");
            if (!ev.kcs.empty())
                ev.kcs = {artificial_for(ev.kcs)};
        }
    }

    if (dataset.graph && dataset.graph->level() == GraphLevel::KC) {
        // Each original node maps to every artificial KC that contains it, or
        // to itself (re-interned) when no event set contains it.
        std::unordered_map<Id, std::vector<Id>> images;
        for (const auto& [set, id] : id_of_set)
            for (Id k : set)
                images[k].push_back(id);
        auto image = [&](Id node) {
            auto it = images.find(node);
            if (it != images.end())
                return it->second;
            return std::vector<Id>{fresh.intern(old.name(node))};
        };
        KCGraph lifted(GraphLevel::KC, dataset.graph->rollup());
        for (const auto& [pre, post] : dataset.graph->edges())
            for (Id a : image(pre))
                for (Id b : image(post))
                    if (a != b)
                        lifted.add_edge(a, b);
        dataset.graph = std::move(lifted);
    }
    dataset.names.kcs = std::move(fresh);
    result.dataset = std::move(dataset);
    return result;
}

int FoldAssignment::fold(const std::string& student) const {
    auto it = fold_of.find(student);
    if (it == fold_of.end())
        throw ConfigError("student '" + student + "' missing from fold assignment");
    return it->second;
}

std::vector<std::size_t> FoldAssignment::test_students(const Dataset& d, int f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < d.students.size(); ++i)
        if (fold(d.names.students.name(d.students[i].student)) == f)
            out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldAssignment::train_students(const Dataset& d, int f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < d.students.size(); ++i)
        if (fold(d.names.students.name(d.students[i].student)) != f)
            out.push_back(i);
    return out;
}

Json FoldAssignment::to_json() const {
    Json folds = Json::object();
    for (const auto& [student, f] : fold_of)
        folds[student] = f;
    return {{"version", 1}, {"k", k}, {"folds", folds}};
}

FoldAssignment FoldAssignment::from_json(const Json& j) {
    FoldAssignment a;
    a.k = j.at("k").get<int>();
    for (const auto& [student, f] : j.at("folds").items()) {
        const int v = f.get<int>();
        if (v < 0 || v >= a.k)
            throw SchemaError("fold index out of range for student '" + student + "'");
        a.fold_of.emplace(student, v);
    }
    return a;
}

FoldAssignment split_folds(const Dataset& dataset, int k, std::uint64_t seed) {
    if (k < 2)
        throw ConfigError("cross-validation needs k >= 2");
    if (dataset.students.size() < static_cast<std::size_t>(k))
        throw ConfigError("cannot split " + std::to_string(dataset.students.size()) + " students into " +
                          std::to_string(k) + " folds");
    std::vector<std::string> names;
    names.reserve(dataset.students.size());
    for (const auto& log : dataset.students)
        names.push_back(dataset.names.students.name(log.student));
    std::sort(names.begin(), names.end());
    Rng rng(seed);
    rng.shuffle(std::span<std::string>(names));
    FoldAssignment a;
    a.k = k;
    for (std::size_t i = 0; i < names.size(); ++i)
        a.fold_of.emplace(names[i], static_cast<int>(i % static_cast<std::size_t>(k)));
    return a;
}

std::size_t derive_lag_times(std::span<InteractionEvent> events) {
    std::size_t clamped = 0;
    std::optional<double> previous_completion;
    for (auto& ev : events) {
        if (!ev.is_question())
            continue;
        if (previous_completion) {
            double lag = static_cast<double>(ev.timestamp) - *previous_completion;
            if (lag < 0.0) {
                lag = 0.0;
                ++clamped;
            }
            ev.lag_s = lag;
        } else {
            ev.lag_s.reset();
        }
        previous_completion = static_cast<double>(ev.timestamp) + ev.elapsed_s.value_or(0.0);
    }
    return clamped;
}

}// namespace ktrace
