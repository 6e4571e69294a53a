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
#ifndef KTRACE_STATE_HPP_
#define KTRACE_STATE_HPP_

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include <ktrace/core.hpp>

namespace ktrace {

struct CountPair {
    std::uint32_t correct = 0;
    std::uint32_t attempts = 0;

    friend bool operator==(const CountPair&, const CountPair&) = default;
};

/// Timestamped responses of one scope (total, one KC, one question).
class ResponseHistory {
  public:
    void add(std::int64_t timestamp, bool correct);

    CountPair all() const;
    /// Responses with now - timestamp < window_seconds; infinite windows count everything.
    CountPair within(std::int64_t now, double window_seconds) const;

  private:
    std::vector<std::int64_t> timestamps_;
    std::vector<std::uint32_t> correct_prefix_{0};
};

/// Count and minutes of one kind of study material (videos, reading, hints).
struct MaterialTally {
    double count = 0.0;
    double minutes = 0.0;
};

struct MaterialCounter {
    MaterialTally total;
    std::unordered_map<Id, MaterialTally> per_kc;

    void add(std::span<const Id> kcs, double count, double minutes);
    /// Tally summed over the given KCs.
    MaterialTally over(std::span<const Id> kcs) const;
};

/// Running aggregates of one student's history. Confined to one worker at a time.
class StudentState {
  public:
    /// Advances every aggregate by one event; events must arrive in time order.
    void apply(const InteractionEvent& event);

    const ResponseHistory& total() const { return total_; }
    const ResponseHistory* kc(Id kc) const;
    const ResponseHistory* question(Id question) const;
    CountPair kc_counts(Id kc) const;
    CountPair question_counts(Id question) const;
    CountPair study_module_counts(Id module) const;
    CountPair part_area_counts(Id part) const;

    /// Number of prior question responses.
    std::uint32_t responses() const { return total_.all().attempts; }
    /// Correctness of the most recent responses, most recent in bit 0.
    std::uint64_t recent_bits() const { return recent_bits_; }
    /// How many responses recent_bits() holds (at most 64).
    std::uint32_t recent_count() const { return recent_count_; }

    const MaterialCounter& videos_watched() const { return videos_watched_; }
    const MaterialCounter& videos_skipped() const { return videos_skipped_; }
    const MaterialCounter& reading() const { return reading_; }
    const MaterialCounter& hints() const { return hints_; }

    std::optional<double> prior_elapsed_s() const { return prior_elapsed_; }
    std::optional<double> prior_lag_s() const { return prior_lag_; }

  private:
    std::optional<std::int64_t> last_timestamp_;
    ResponseHistory total_;
    std::unordered_map<Id, ResponseHistory> kcs_;
    std::unordered_map<Id, ResponseHistory> questions_;
    std::unordered_map<Id, CountPair> modules_;
    std::unordered_map<Id, CountPair> parts_;
    std::uint64_t recent_bits_ = 0;
    std::uint32_t recent_count_ = 0;
    MaterialCounter videos_watched_;
    MaterialCounter videos_skipped_;
    MaterialCounter reading_;
    MaterialCounter hints_;
    std::optional<double> prior_elapsed_;
    std::optional<double> prior_lag_;
};

}// namespace ktrace

#endif// KTRACE_STATE_HPP_
