#include "shepherd/io.hpp"

#include "shepherd/error.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace shepherd {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(fmt::format("cannot open {}", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(fmt::format("cannot write {}", tmp.string()));
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(fmt::format("write failed: {}", tmp.string()));
    }
    fs::rename(tmp, path);
}

void append_line(const fs::path& path, std::string_view line) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw Error(fmt::format("cannot append to {}", path.string()));
    out << line << '\n';
    out.flush();
}

Json parse_json(std::string_view text, std::string_view what) {
    try {
        return Json::parse(text);
    } catch (const Json::exception& e) {
        throw ParseError(fmt::format("{}: invalid JSON: {}", what, e.what()));
    }
}

void for_each_jsonl(std::string_view text, const std::function<void(const Json&, std::size_t)>& fn) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        auto end = nl == std::string_view::npos ? text.size() : nl;
        auto line = text.substr(start, end - start);
        ++line_no;
        start = end + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        fn(parse_json(line, fmt::format("line {}", line_no)), line_no);
    }
}

namespace {

template <typename T>
T field_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const Json::exception&) {
        throw ParseError(fmt::format("field \"{}\" has the wrong type", key));
    }
}

template <typename T>
T required(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ParseError(fmt::format("missing field \"{}\"", key));
    try {
        return j[key].get<T>();
    } catch (const Json::exception&) {
        throw ParseError(fmt::format("field \"{}\" has the wrong type", key));
    }
}

}  // namespace

Json to_json(const TaskSpec& t) {
    return Json{{"id", t.id},
                {"intent", t.intent},
                {"start_url", t.start_url},
                {"difficulty", difficulty_name(t.difficulty)},
                {"website", t.website}};
}

TaskSpec task_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("task must be a JSON object");
    TaskSpec t;
    t.id = field_or<std::string>(j, "id", field_or<std::string>(j, "task_id", ""));
    t.intent = required<std::string>(j, "intent");
    if (t.intent.empty()) throw ParseError("task intent is empty");
    t.start_url = field_or<std::string>(j, "start_url", "");
    t.difficulty = parse_difficulty(field_or<std::string>(j, "difficulty", "unknown"));
    t.website = field_or<std::string>(j, "website", "");
    return t;
}

Json to_json(const Observation& o) {
    Json j{{"url", o.url}, {"axtree", o.axtree}};
    if (o.screenshot) j["screenshot"] = Json{{"path", o.screenshot->path}, {"media_type", o.screenshot->media_type}};
    return j;
}

Observation observation_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("observation must be a JSON object");
    Observation o;
    o.url = field_or<std::string>(j, "url", "");
    o.axtree = field_or<std::string>(j, "axtree", "");
    if (j.contains("screenshot") && j["screenshot"].is_object()) {
        Screenshot s;
        s.path = required<std::string>(j["screenshot"], "path");
        s.media_type = field_or<std::string>(j["screenshot"], "media_type", "image/png");
        o.screenshot = s;
    } else if (j.contains("screenshot_path") && j["screenshot_path"].is_string()) {
        o.screenshot = Screenshot{j["screenshot_path"].get<std::string>(), "image/png"};
    }
    return o;
}

Json to_json(const Checklist& c) {
    Json items = Json::array();
    for (const auto& s : c.items) items.push_back(Json{{"index", s.index}, {"title", s.title}, {"goal_desc", s.goal_desc}});
    return Json{{"source", c.source == ChecklistSource::Reference ? "reference" : "generated"}, {"items", items}};
}

Checklist checklist_from_json(const Json& j, ChecklistSource source) {
    if (j.is_string()) {
        auto c = parse_checklist(j.get<std::string>());
        c.source = source;
        return c;
    }
    const Json* items = &j;
    if (j.is_object()) {
        if (!j.contains("items")) throw ParseError("checklist object needs \"items\"");
        items = &j["items"];
        if (j.contains("source") && j["source"].is_string())
            source = j["source"].get<std::string>() == "generated" ? ChecklistSource::Generated : ChecklistSource::Reference;
    }
    if (!items->is_array() || items->empty()) throw ParseError("checklist must have at least one item");
    if (items->size() > kMaxChecklistItems)
        throw ParseError(fmt::format("checklist has {} items (max {})", items->size(), kMaxChecklistItems));
    Checklist c;
    c.source = source;
    int index = 1;
    for (const auto& it : *items) {
        Subgoal s;
        s.index = index++;
        if (it.is_string()) {
            s.title = it.get<std::string>();
        } else {
            s.title = required<std::string>(it, "title");
            s.goal_desc = field_or<std::string>(it, "goal_desc", field_or<std::string>(it, "goal", ""));
        }
        if (s.title.empty()) throw ParseError("checklist item title is empty");
        c.items.push_back(std::move(s));
    }
    return c;
}

Action action_from_json(const Json& j) {
    if (!j.is_string()) throw ParseError("action must be a string");
    try {
        return parse_action(j.get<std::string>());
    } catch (const SyntaxError& e) {
        throw ParseError(fmt::format("bad action '{}': {}", j.get<std::string>(), e.what()));
    }
}

Json to_json(const Step& s) {
    Json j{{"thought", s.thought}, {"action", serialize_action(s.action)}};
    j["observation"] = to_json(s.observation_before);
    return j;
}

Step step_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("history step must be a JSON object");
    Step s;
    s.thought = field_or<std::string>(j, "thought", "");
    s.action = action_from_json(j.contains("action") ? j["action"] : Json());
    if (j.contains("observation")) s.observation_before = observation_from_json(j["observation"]);
    else s.observation_before = observation_from_json(j);
    return s;
}

Json to_json(const Completion& c) {
    Json tokens = Json::array();
    for (const auto& t : c.tokens) {
        Json top = Json::array();
        for (const auto& [tok, lp] : t.top) top.push_back(Json::array({tok, lp}));
        tokens.push_back(Json{{"token", t.token}, {"logprob", t.logprob}, {"top", top}});
    }
    return Json{{"text", c.text},
                {"tokens", tokens},
                {"usage", Json{{"input_tokens", c.usage.input_tokens}, {"output_tokens", c.usage.output_tokens}}}};
}

Completion completion_from_json(const Json& j) {
    Completion c;
    if (j.is_string()) {
        c.text = j.get<std::string>();
        return c;
    }
    if (!j.is_object()) throw ParseError("completion must be a string or an object");
    c.text = field_or<std::string>(j, "text", "");
    if (j.contains("tokens")) {
        for (const auto& t : j["tokens"]) {
            TokenLogprob tl;
            tl.token = required<std::string>(t, "token");
            tl.logprob = required<double>(t, "logprob");
            if (t.contains("top")) {
                for (const auto& alt : t["top"]) {
                    if (alt.is_array() && alt.size() == 2) tl.top.emplace_back(alt[0].get<std::string>(), alt[1].get<double>());
                    else tl.top.emplace_back(required<std::string>(alt, "token"), required<double>(alt, "logprob"));
                }
            }
            c.tokens.push_back(std::move(tl));
        }
    }
    if (j.contains("usage")) {
        c.usage.input_tokens = field_or<std::int64_t>(j["usage"], "input_tokens", 0);
        c.usage.output_tokens = field_or<std::int64_t>(j["usage"], "output_tokens", 0);
    }
    return c;
}

Json to_json(const TrajectoryRecord& r) {
    Json j{{"task_id", r.task_id}, {"step_index", r.step_index}, {"thought", r.thought},
           {"action", r.action},   {"url", r.url},               {"axtree", r.axtree}};
    if (r.screenshot_path) j["screenshot_path"] = *r.screenshot_path;
    return j;
}

TrajectoryRecord trajectory_record_from_json(const Json& j) {
    TrajectoryRecord r;
    r.task_id = required<std::string>(j, "task_id");
    r.step_index = required<std::size_t>(j, "step_index");
    r.thought = field_or<std::string>(j, "thought", "");
    r.action = required<std::string>(j, "action");
    r.url = field_or<std::string>(j, "url", "");
    r.axtree = field_or<std::string>(j, "axtree", "");
    if (j.contains("screenshot_path") && j["screenshot_path"].is_string())
        r.screenshot_path = j["screenshot_path"].get<std::string>();
    return r;
}

std::string format_metric(double v) { return fmt::format("{:.6f}", v); }

}  // namespace shepherd
