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
#ifndef KTRACE_TESTS_HELPERS_HPP_
#define KTRACE_TESTS_HELPERS_HPP_

#include <filesystem>
#include <initializer_list>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <ktrace/ingest.hpp>

namespace ktrace::testing {

/// One CSV row; unset cells stay empty.
struct Row {
    std::string student;
    std::int64_t timestamp = 0;
    std::string kind = "question_response";
    std::string question;
    std::string kcs;
    std::string correct;
    std::string elapsed;
    std::string module;
    std::string hint_count;
    std::string minutes;
};

inline std::string header() {
    std::string h;
    for (std::size_t c = 0; c < kCanonicalColumns.size(); ++c)
        h += (c ? "," : "") + std::string(kCanonicalColumns[c]);
    return h + "\n";
}

inline std::string csv(const std::vector<Row>& rows) {
    std::string out = header();
    for (const auto& r : rows) {
        std::vector<std::string> cells(kCanonicalColumns.size());
        cells[0] = r.student;
        cells[1] = std::to_string(r.timestamp);
        cells[2] = r.kind;
        cells[3] = r.question;
        cells[4] = r.kcs;
        cells[5] = r.correct;
        cells[6] = r.elapsed;
        cells[7] = r.module;
        cells[16] = r.hint_count;
        cells[17] = r.minutes;
        for (std::size_t c = 0; c < cells.size(); ++c)
            out += (c ? "," : "") + cells[c];
        out += "\n";
    }
    return out;
}

inline DatasetManifest manifest(std::initializer_list<Capability> caps) {
    DatasetManifest m;
    m.name = "test";
    for (auto c : caps)
        m.enable(c);
    return m;
}

inline Dataset load(const std::vector<Row>& rows, const DatasetManifest& m) {
    std::istringstream in(csv(rows));
    return load_events(in, m);
}

/// A fresh directory under the system temp path, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("ktrace-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

}// namespace ktrace::testing

#endif// KTRACE_TESTS_HELPERS_HPP_
