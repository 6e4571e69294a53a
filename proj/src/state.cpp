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
#include <ktrace/state.hpp>

#include <algorithm>
#include <cmath>

namespace ktrace {

void ResponseHistory::add(std::int64_t timestamp, bool correct) {
    timestamps_.push_back(timestamp);
    correct_prefix_.push_back(correct_prefix_.back() + (correct ? 1u : 0u));
}

CountPair ResponseHistory::all() const {
    return {correct_prefix_.back(), static_cast<std::uint32_t>(timestamps_.size())};
}

CountPair ResponseHistory::within(std::int64_t now, double window_seconds) const {
    if (std::isinf(window_seconds))
        return all();
    // First response with now - t < w, i.e. t > now - w.
    const double cutoff = static_cast<double>(now) - window_seconds;
    auto first = std::upper_bound(timestamps_.begin(), timestamps_.end(), cutoff,
                                  [](double c, std::int64_t t) { return c < static_cast<double>(t); });
    const auto start = static_cast<std::size_t>(first - timestamps_.begin());
    return {correct_prefix_.back() - correct_prefix_[start], static_cast<std::uint32_t>(timestamps_.size() - start)};
}

void MaterialCounter::add(std::span<const Id> kcs, double count, double minutes) {
    total.count += count;
    total.minutes += minutes;
    for (Id k : kcs) {
        auto& t = per_kc[k];
        t.count += count;
        t.minutes += minutes;
    }
}

MaterialTally MaterialCounter::over(std::span<const Id> kcs) const {
    MaterialTally sum;
    for (Id k : kcs) {
        auto it = per_kc.find(k);
        if (it != per_kc.end()) {
            sum.count += it->second.count;
            sum.minutes += it->second.minutes;
        }
    }
    return sum;
}

const ResponseHistory* StudentState::kc(Id kc) const {
    auto it = kcs_.find(kc);
    return it == kcs_.end() ? nullptr : &it->second;
}

const ResponseHistory* StudentState::question(Id question) const {
    auto it = questions_.find(question);
    return it == questions_.end() ? nullptr : &it->second;
}

CountPair StudentState::kc_counts(Id k) const {
    const auto* h = kc(k);
    return h ? h->all() : CountPair{};
}

CountPair StudentState::question_counts(Id q) const {
    const auto* h = question(q);
    return h ? h->all() : CountPair{};
}

CountPair StudentState::study_module_counts(Id module) const {
    auto it = modules_.find(module);
    return it == modules_.end() ? CountPair{} : it->second;
}

CountPair StudentState::part_area_counts(Id part) const {
    auto it = parts_.find(part);
    return it == parts_.end() ? CountPair{} : it->second;
}

void StudentState::apply(const InteractionEvent& ev) {
    if (last_timestamp_ && ev.timestamp < *last_timestamp_)
        throw SequencingError("event at " + std::to_string(ev.timestamp) + " precedes previous event at " +
                              std::to_string(*last_timestamp_));
    last_timestamp_ = ev.timestamp;

    switch (ev.kind) {
        case EventKind::QuestionResponse: {
            if (!ev.correct)
                throw SchemaError("question response without correctness");
            const bool correct = *ev.correct;
            total_.add(ev.timestamp, correct);
            for (Id k : ev.kcs)
                kcs_[k].add(ev.timestamp, correct);
            if (ev.question != kNoId)
                questions_[ev.question].add(ev.timestamp, correct);
            auto bump = [correct](CountPair& c) {
                ++c.attempts;
                c.correct += correct ? 1u : 0u;
            };
            if (ev.study_module != kNoId)
                bump(modules_[ev.study_module]);
            if (Id part = ev.context_value(ContextField::PartArea); part != kNoId)
                bump(parts_[part]);
            recent_bits_ = (recent_bits_ << 1) | (correct ? 1u : 0u);
            recent_count_ = std::min<std::uint32_t>(recent_count_ + 1, 64);
            if (ev.hint_count || ev.consumption_minutes)
                hints_.add(ev.kcs, ev.hint_count.value_or(0), ev.consumption_minutes.value_or(0.0));
            prior_elapsed_ = ev.elapsed_s;
            prior_lag_ = ev.lag_s;
            break;
        }
        case EventKind::VideoWatch:
            videos_watched_.add(ev.kcs, 1.0, ev.consumption_minutes.value_or(0.0));
            break;
        case EventKind::VideoSkip:
            videos_watched_.add(ev.kcs, 1.0, ev.consumption_minutes.value_or(0.0));
            videos_skipped_.add(ev.kcs, 1.0, 0.0);
            break;
        case EventKind::Reading:
            reading_.add(ev.kcs, 1.0, ev.consumption_minutes.value_or(0.0));
            break;
        case EventKind::HintUse:
            hints_.add(ev.kcs, ev.hint_count.value_or(1), ev.consumption_minutes.value_or(0.0));
            break;
    }
}

}// namespace ktrace
