#pragma once

#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ttc::suite {

struct Choice {
    std::string label;
    std::string text;

    bool operator==(const Choice &) const = default;
};

struct Question {
    std::string id;
    std::string stem;
    std::vector<Choice> choices;
    std::optional<std::string> answer_key;
    std::optional<std::string> topic;

    bool operator==(const Question &) const = default;
};

enum class TaskKind { answer_choice, paraphrase, open_answer };

const char *to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view name);
std::vector<TaskKind> all_task_kinds();
std::vector<std::string> task_kind_names();

// Canonical instruction phrases used by the default templates. Fixed wording:
// token counts stay reproducible and the mock endpoint recognizes the task
// from the prompt alone.
inline constexpr const char *kAnswerOnlyInstruction =
    "Answer only with the letter of the selected choice.";
inline constexpr const char *kParaphraseInstruction =
    "Paraphrase the following question without changing its meaning.";
inline constexpr const char *kExplainInstruction =
    "explain the reasoning for the selected answer";

struct PromptTemplate {
    TaskKind task_kind = TaskKind::answer_choice;
    std::string system_text;
    std::string user_pattern; // placeholders: {stem}, and {choices} except for paraphrase
    std::string version;
};

/// Throws ValidationError when the pattern's placeholders do not match the
/// task kind or contain an unknown placeholder.
void validate_template(const PromptTemplate &tpl);

PromptTemplate default_template(TaskKind kind);
std::map<TaskKind, PromptTemplate> default_templates();

/// Template file, schema "templates/v1".
std::map<TaskKind, PromptTemplate> load_templates(const std::string &path);
std::string templates_document_bytes(const std::map<TaskKind, PromptTemplate> &templates);

struct Message {
    std::string role; // "system" or "user"
    std::string content;

    bool operator==(const Message &) const = default;
};

struct PromptCase {
    std::string case_id; // "<question_id>#<task_kind>"
    std::string question_id;
    TaskKind task_kind = TaskKind::answer_choice;
    std::vector<Message> messages;
    std::string template_version;

    bool operator==(const PromptCase &) const = default;
};

struct TaskSuite {
    std::string suite_id;
    std::string created_at; // RFC 3339 UTC
    std::string dataset_digest;
    std::map<TaskKind, std::string> template_versions;
    std::map<TaskKind, std::vector<PromptCase>> cases;

    std::size_t total_cases() const;
};

/// One JSON record per line; see the documented dataset schema. Order is
/// preserved and every record is validated.
std::vector<Question> load_questions(const std::string &path);
std::vector<Question> parse_questions(std::istream &in, const std::string &source_name);

std::string format_choices(const Question &q);

/// Pure function of (question, template); identical inputs yield
/// byte-identical messages.
PromptCase render_prompt(const Question &q, TaskKind kind, const PromptTemplate &tpl);

TaskSuite build_suite(const std::vector<Question> &questions, const std::set<TaskKind> &kinds,
                      const std::map<TaskKind, PromptTemplate> &templates,
                      const std::string &dataset_digest = "", const std::string &created_at = "");

struct ValidationIssue {
    std::string category; // duplicate_id | empty_stem | answer_key_violation
    std::string question_id;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    std::map<std::string, int> counts_by_category() const;
    std::size_t total() const { return issues.size(); }
};

/// Report-only; never mutates input.
ValidationReport validate_dataset(const std::vector<Question> &questions);

/// Suite file, schema "suite/v1".
void save_suite(const TaskSuite &s, const std::string &path);
std::string suite_document_bytes(const TaskSuite &s);
TaskSuite load_suite(const std::string &path);

} // namespace ttc::suite
