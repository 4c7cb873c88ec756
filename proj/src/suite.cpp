#include "ttc/suite.hpp"

#include "ttc/errors.hpp"
#include "ttc/hash.hpp"
#include "ttc/version.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <regex>
#include <sstream>

using nlohmann::json;

namespace ttc::suite {

const char *to_string(TaskKind kind) {
    switch (kind) {
    case TaskKind::answer_choice: return "answer_choice";
    case TaskKind::paraphrase: return "paraphrase";
    case TaskKind::open_answer: return "open_answer";
    }
    return "answer_choice";
}

TaskKind task_kind_from_string(std::string_view name) {
    if (name == "answer_choice") return TaskKind::answer_choice;
    if (name == "paraphrase") return TaskKind::paraphrase;
    if (name == "open_answer") return TaskKind::open_answer;
    throw ValidationError("unknown task kind: " + std::string(name) +
                          " (allowed: answer_choice, paraphrase, open_answer)");
}

std::vector<TaskKind> all_task_kinds() {
    return {TaskKind::answer_choice, TaskKind::paraphrase, TaskKind::open_answer};
}

std::vector<std::string> task_kind_names() {
    std::vector<std::string> names;
    for (TaskKind k : all_task_kinds()) {
        names.emplace_back(to_string(k));
    }
    return names;
}

void validate_template(const PromptTemplate &tpl) {
    if (tpl.version.empty()) {
        throw ValidationError("template for " + std::string(to_string(tpl.task_kind)) +
                              " has an empty version");
    }
    static const std::regex placeholder_re(R"(\{([a-z_]+)\})");
    bool has_stem = false;
    bool has_choices = false;
    auto begin = std::sregex_iterator(tpl.user_pattern.begin(), tpl.user_pattern.end(),
                                      placeholder_re);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        const std::string name = (*it)[1].str();
        if (name == "stem") {
            has_stem = true;
        } else if (name == "choices") {
            has_choices = true;
        } else {
            throw ValidationError("template " + tpl.version + ": unresolved placeholder {" + name +
                                  "}");
        }
    }
    if (!has_stem) {
        throw ValidationError("template " + tpl.version + ": missing {stem} placeholder");
    }
    const bool wants_choices = tpl.task_kind != TaskKind::paraphrase;
    if (wants_choices && !has_choices) {
        throw ValidationError("template " + tpl.version + ": missing {choices} placeholder for " +
                              to_string(tpl.task_kind));
    }
    if (!wants_choices && has_choices) {
        throw ValidationError("template " + tpl.version +
                              ": paraphrase pattern must not contain {choices}");
    }
}

PromptTemplate default_template(TaskKind kind) {
    PromptTemplate tpl;
    tpl.task_kind = kind;
    tpl.system_text = "You are a helpful assistant.";
    tpl.version = "default/v1";
    switch (kind) {
    case TaskKind::answer_choice:
        tpl.user_pattern = std::string("Question:\n{stem}\n\nChoices:\n{choices}\n\n") +
                           kAnswerOnlyInstruction;
        break;
    case TaskKind::paraphrase:
        tpl.user_pattern = std::string(kParaphraseInstruction) + "\n\nQuestion:\n{stem}";
        break;
    case TaskKind::open_answer:
        tpl.user_pattern = std::string("Question:\n{stem}\n\nChoices:\n{choices}\n\n") +
                           "Answer the question and " + kExplainInstruction + ".";
        break;
    }
    return tpl;
}

std::map<TaskKind, PromptTemplate> default_templates() {
    std::map<TaskKind, PromptTemplate> out;
    for (TaskKind k : all_task_kinds()) {
        out.emplace(k, default_template(k));
    }
    return out;
}

std::string templates_document_bytes(const std::map<TaskKind, PromptTemplate> &templates) {
    json doc;
    doc["schema"] = "templates/v1";
    json list = json::array();
    for (const auto &[kind, tpl] : templates) {
        list.push_back({{"task_kind", to_string(kind)},
                        {"version", tpl.version},
                        {"system_text", tpl.system_text},
                        {"user_pattern", tpl.user_pattern}});
    }
    doc["templates"] = list;
    return doc.dump(2) + "\n";
}

std::map<TaskKind, PromptTemplate> load_templates(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open template file: " + path);
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception &ex) {
        throw ValidationError("template file " + path + ": " + ex.what());
    }
    if (doc.value("schema", "") != "templates/v1") {
        throw ValidationError("template file " + path + ": unsupported schema \"" +
                              doc.value("schema", "") + "\" (supported: templates/v1)");
    }
    std::map<TaskKind, PromptTemplate> out;
    for (const auto &entry : doc.at("templates")) {
        PromptTemplate tpl;
        tpl.task_kind = task_kind_from_string(entry.at("task_kind").get<std::string>());
        tpl.version = entry.at("version").get<std::string>();
        tpl.system_text = entry.at("system_text").get<std::string>();
        tpl.user_pattern = entry.at("user_pattern").get<std::string>();
        validate_template(tpl);
        if (!out.emplace(tpl.task_kind, tpl).second) {
            throw ValidationError("template file " + path + ": duplicate template for " +
                                  to_string(tpl.task_kind));
        }
    }
    return out;
}

namespace {

std::string require_string(const json &record, const char *field, const std::string &where) {
    if (!record.contains(field) || record.at(field).is_null()) {
        throw ValidationError(where + ": missing required field \"" + field + "\"");
    }
    if (!record.at(field).is_string()) {
        throw ValidationError(where + ": field \"" + field + "\" must be a string");
    }
    return record.at(field).get<std::string>();
}

Question parse_question_record(const json &record, const std::string &where) {
    Question q;
    q.id = require_string(record, "id", where);
    if (q.id.empty()) {
        throw ValidationError(where + ": empty id");
    }
    q.stem = require_string(record, "stem", where);
    if (q.stem.empty()) {
        throw ValidationError(where + ": empty stem");
    }
    if (!record.contains("choices") || !record.at("choices").is_array()) {
        throw ValidationError(where + ": missing required field \"choices\"");
    }
    const auto &choices = record.at("choices");
    if (choices.size() < 2 || choices.size() > 26) {
        throw ValidationError(where + ": choice count " + std::to_string(choices.size()) +
                              " outside [2, 26]");
    }
    for (std::size_t i = 0; i < choices.size(); ++i) {
        const auto &c = choices[i];
        Choice parsed;
        parsed.label = require_string(c, "label", where);
        parsed.text = c.value("text", "");
        const std::string expected(1, static_cast<char>('a' + i));
        if (parsed.label != expected) {
            throw ValidationError(where + ": label gap or bad label \"" + parsed.label +
                                  "\" at position " + std::to_string(i) + " (expected \"" +
                                  expected + "\")");
        }
        q.choices.push_back(std::move(parsed));
    }
    if (record.contains("answer") && !record.at("answer").is_null()) {
        const std::string answer = record.at("answer").get<std::string>();
        const bool known = std::any_of(q.choices.begin(), q.choices.end(),
                                       [&](const Choice &c) { return c.label == answer; });
        if (!known) {
            throw ValidationError(where + ": answer key \"" + answer + "\" not among labels");
        }
        q.answer_key = answer;
    }
    if (record.contains("topic") && !record.at("topic").is_null()) {
        q.topic = record.at("topic").get<std::string>();
    }
    return q;
}

} // namespace

std::vector<Question> parse_questions(std::istream &in, const std::string &source_name) {
    std::vector<Question> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const std::string where = source_name + ":" + std::to_string(line_no);
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception &ex) {
            throw ValidationError(where + ": malformed record: " + ex.what());
        }
        Question q = parse_question_record(record, where);
        if (!ids.insert(q.id).second) {
            throw ValidationError(where + ": duplicate id \"" + q.id + "\"");
        }
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<Question> load_questions(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open dataset file: " + path);
    }
    return parse_questions(in, path);
}

std::string format_choices(const Question &q) {
    std::string out;
    for (std::size_t i = 0; i < q.choices.size(); ++i) {
        if (i > 0) {
            out += '\n';
        }
        out += "(" + q.choices[i].label + ") " + q.choices[i].text;
    }
    return out;
}

namespace {

void substitute_all(std::string &text, std::string_view placeholder, std::string_view value) {
    std::size_t at = 0;
    while ((at = text.find(placeholder, at)) != std::string::npos) {
        text.replace(at, placeholder.size(), value);
        at += value.size();
    }
}

} // namespace

PromptCase render_prompt(const Question &q, TaskKind kind, const PromptTemplate &tpl) {
    if (tpl.task_kind != kind) {
        throw ValidationError("template/kind mismatch: template is for " +
                              std::string(to_string(tpl.task_kind)) + ", requested " +
                              to_string(kind));
    }
    validate_template(tpl);

    std::string user = tpl.user_pattern;
    substitute_all(user, "{stem}", q.stem);
    substitute_all(user, "{choices}", format_choices(q));

    PromptCase pc;
    pc.case_id = q.id + "#" + to_string(kind);
    pc.question_id = q.id;
    pc.task_kind = kind;
    pc.template_version = tpl.version;
    if (!tpl.system_text.empty()) {
        pc.messages.push_back({"system", tpl.system_text});
    }
    pc.messages.push_back({"user", std::move(user)});
    return pc;
}

std::size_t TaskSuite::total_cases() const {
    std::size_t n = 0;
    for (const auto &[kind, list] : cases) {
        n += list.size();
    }
    return n;
}

namespace {

std::string utc_now_rfc3339() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

TaskSuite build_suite(const std::vector<Question> &questions, const std::set<TaskKind> &kinds,
                      const std::map<TaskKind, PromptTemplate> &templates,
                      const std::string &dataset_digest, const std::string &created_at) {
    if (kinds.empty()) {
        throw ValidationError("build_suite: task set is empty");
    }
    TaskSuite s;
    s.dataset_digest = dataset_digest;
    s.created_at = created_at.empty() ? utc_now_rfc3339() : created_at;

    std::string id_material = dataset_digest;
    for (TaskKind kind : kinds) {
        auto it = templates.find(kind);
        if (it == templates.end()) {
            throw ValidationError(std::string("build_suite: no template for task ") +
                                  to_string(kind));
        }
        std::vector<PromptCase> list;
        list.reserve(questions.size());
        for (const Question &q : questions) {
            list.push_back(render_prompt(q, kind, it->second));
        }
        s.template_versions[kind] = it->second.version;
        s.cases[kind] = std::move(list);
        id_material += std::string("|") + to_string(kind) + "@" + it->second.version;
    }
    s.suite_id = "suite-" + hex64(fnv1a64(id_material)).substr(0, 12);
    return s;
}

std::map<std::string, int> ValidationReport::counts_by_category() const {
    std::map<std::string, int> counts;
    for (const auto &issue : issues) {
        counts[issue.category]++;
    }
    return counts;
}

ValidationReport validate_dataset(const std::vector<Question> &questions) {
    ValidationReport report;
    std::set<std::string> ids;
    for (const Question &q : questions) {
        if (!ids.insert(q.id).second) {
            report.issues.push_back({"duplicate_id", q.id, "id occurs more than once"});
        }
        if (q.stem.empty()) {
            report.issues.push_back({"empty_stem", q.id, "stem is empty"});
        }
        if (q.answer_key) {
            const bool known = std::any_of(q.choices.begin(), q.choices.end(),
                                           [&](const Choice &c) { return c.label == *q.answer_key; });
            if (!known) {
                report.issues.push_back({"answer_key_violation", q.id,
                                         "answer key \"" + *q.answer_key + "\" not among labels"});
            }
        }
    }
    return report;
}

namespace {

json case_to_json(const PromptCase &pc) {
    json messages = json::array();
    for (const Message &m : pc.messages) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    return {{"case_id", pc.case_id},
            {"question_id", pc.question_id},
            {"task_kind", to_string(pc.task_kind)},
            {"template_version", pc.template_version},
            {"messages", messages}};
}

PromptCase case_from_json(const json &j) {
    PromptCase pc;
    pc.case_id = j.at("case_id").get<std::string>();
    pc.question_id = j.at("question_id").get<std::string>();
    pc.task_kind = task_kind_from_string(j.at("task_kind").get<std::string>());
    pc.template_version = j.at("template_version").get<std::string>();
    for (const auto &m : j.at("messages")) {
        pc.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    }
    return pc;
}

} // namespace

std::string suite_document_bytes(const TaskSuite &s) {
    json doc;
    doc["schema"] = "suite/v1";
    doc["suite_id"] = s.suite_id;
    doc["created_at"] = s.created_at;
    doc["dataset_digest"] = s.dataset_digest;
    doc["tool_version"] = kVersion;
    json versions;
    for (const auto &[kind, version] : s.template_versions) {
        versions[to_string(kind)] = version;
    }
    doc["template_versions"] = versions;
    json cases;
    for (const auto &[kind, list] : s.cases) {
        json arr = json::array();
        for (const PromptCase &pc : list) {
            arr.push_back(case_to_json(pc));
        }
        cases[to_string(kind)] = arr;
    }
    doc["cases"] = cases;
    return doc.dump(2) + "\n";
}

void save_suite(const TaskSuite &s, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write suite file: " + path);
    }
    out << suite_document_bytes(s);
    if (!out) {
        throw IoError("failed writing suite file: " + path);
    }
}

TaskSuite load_suite(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open suite file: " + path);
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception &ex) {
        throw ValidationError("suite file " + path + ": " + ex.what());
    }
    if (doc.value("schema", "") != "suite/v1") {
        throw ValidationError("suite file " + path + ": unsupported schema \"" +
                              doc.value("schema", "") + "\" (supported: suite/v1)");
    }
    TaskSuite s;
    s.suite_id = doc.at("suite_id").get<std::string>();
    s.created_at = doc.at("created_at").get<std::string>();
    s.dataset_digest = doc.value("dataset_digest", "");
    for (const auto &[name, version] : doc.at("template_versions").items()) {
        s.template_versions[task_kind_from_string(name)] = version.get<std::string>();
    }
    for (const auto &[name, arr] : doc.at("cases").items()) {
        const TaskKind kind = task_kind_from_string(name);
        std::vector<PromptCase> list;
        for (const auto &entry : arr) {
            list.push_back(case_from_json(entry));
        }
        s.cases[kind] = std::move(list);
    }
    return s;
}

} // namespace ttc::suite
