#pragma once

#include "shepherd/action.hpp"
#include "shepherd/backend.hpp"
#include "shepherd/checklist.hpp"
#include "shepherd/rng.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace testing {

namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(SHEPHERD_TEST_DATA); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::mt19937_64 gen{std::random_device{}()};
        for (;;) {
            path_ = fs::temp_directory_path() / ("shepherd-" + tag + "-" + std::to_string(gen() % 100000000));
            if (fs::create_directories(path_)) break;
        }
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline shepherd::Completion text_completion(std::string text) {
    shepherd::Completion c;
    c.text = std::move(text);
    return c;
}

inline std::string random_bid(shepherd::Rng& rng) {
    static const std::string alnum = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    std::string s;
    auto len = 1 + rng.below(6);
    for (std::size_t i = 0; i < len; ++i) s += alnum[rng.below(alnum.size())];
    return s;
}

/// Free text including quotes, escapes, newlines and multi-byte UTF-8.
inline std::string random_text(shepherd::Rng& rng, bool force_space = false) {
    static const std::vector<std::string> pieces = {"a", "b", "Z", "7", " ", "  ", "'", "\"", "\\", "\n", "\t", "\r",
                                                    ",", ")", "(", ";", "é", "日本", "-", "_", "$", "{x}", "%"};
    std::string s;
    auto len = rng.below(12);
    for (std::size_t i = 0; i < len; ++i) s += pieces[rng.below(pieces.size())];
    if (force_space) s += " x";
    return s;
}

inline double random_number(shepherd::Rng& rng) {
    switch (rng.below(3)) {
        case 0: return static_cast<double>(static_cast<std::int64_t>(rng.below(2001)) - 1000);
        case 1: return (static_cast<double>(rng.below(100000)) - 50000.0) / 64.0;
        default: return rng.uniform() * 1e6;
    }
}

/// Random well-formed action, built directly as a struct.
inline shepherd::Action random_action(shepherd::Rng& rng) {
    using namespace shepherd;
    Action a;
    switch (rng.below(10)) {
        case 0: a.kind = ActionKind::Click; a.args = {ElementId{random_bid(rng)}}; break;
        case 1: a.kind = ActionKind::DClick; a.args = {ElementId{random_bid(rng)}}; break;
        case 2: a.kind = ActionKind::Hover; a.args = {ElementId{random_bid(rng)}}; break;
        case 3: a.kind = ActionKind::Fill; a.args = {ElementId{random_bid(rng)}, Text{random_text(rng)}}; break;
        case 4:
            a.kind = ActionKind::Scroll;
            if (rng.below(2)) a.args = {Direction{rng.below(2) ? "down" : random_text(rng)}};
            else a.args = {Number{random_number(rng)}, Number{random_number(rng)}};
            break;
        case 5: a.kind = ActionKind::Goto; a.args = {Url{"https://ex.test/" + random_text(rng)}}; break;
        case 6: a.kind = ActionKind::SendMsgToUser; a.args = {Text{random_text(rng)}}; break;
        case 7:
            a.kind = ActionKind::Noop;
            if (rng.below(2)) a.args = {Number{static_cast<double>(rng.below(5000))}};
            break;
        case 8: {
            a.kind = ActionKind::DragAndDrop;
            auto n = 2 + rng.below(2);
            for (std::size_t i = 0; i < n; ++i) {
                switch (rng.below(3)) {
                    case 0: a.args.emplace_back(ElementId{random_bid(rng)}); break;
                    case 1: a.args.emplace_back(Number{random_number(rng)}); break;
                    default: a.args.emplace_back(Text{random_text(rng, true)}); break;
                }
            }
            break;
        }
        default: {
            a.kind = ActionKind::Other;
            static const std::vector<std::string> names = {"press", "select_option", "tab_focus", "go_back",
                                                           "upload_file", "keyboard_type", "mouse_click2"};
            a.other_name = names[rng.below(names.size())];
            auto n = rng.below(3);
            for (std::size_t i = 0; i < n; ++i) {
                if (rng.below(2)) a.args.emplace_back(Number{random_number(rng)});
                else a.args.emplace_back(Text{random_text(rng)});
            }
            break;
        }
    }
    return a;
}

/// Random checklist whose fields survive the text format (single line, no
/// leading or trailing markdown decoration).
inline shepherd::Checklist random_checklist(shepherd::Rng& rng) {
    static const std::vector<std::string> words = {"Open",  "search", "results", "filter", "price", "Sony",
                                                   "camera", "cart", "checkout", "page", "é", "(2)", "50%",
                                                   "user's", "\"quoted\"", "menu", "sort", "by", "date"};
    auto phrase = [&](std::size_t lo) {
        std::string s;
        auto n = lo + rng.below(6);
        for (std::size_t i = 0; i < n; ++i) {
            if (i) s += ' ';
            s += words[rng.below(words.size())];
        }
        return s;
    };
    shepherd::Checklist c;
    auto n = 1 + rng.below(shepherd::kMaxChecklistItems);
    for (std::size_t i = 0; i < n; ++i)
        c.items.push_back(shepherd::Subgoal{static_cast<int>(i + 1), phrase(1), phrase(2)});
    return c;
}

struct FilterCase {
    std::string branch;
    std::string chosen;
    std::string candidate;
    std::string expected;
};

/// Rows of data/filter_golden.tsv (header skipped).
inline std::vector<FilterCase> load_filter_golden() {
    std::ifstream in(data_dir() / "data" / "filter_golden.tsv");
    std::vector<FilterCase> rows;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string col; std::getline(ss, col, '\t');) cols.push_back(col);
        if (cols.size() != 4) throw std::runtime_error("bad golden row: " + line);
        rows.push_back({cols[0], cols[1], cols[2], cols[3]});
    }
    return rows;
}

}  // namespace testing
