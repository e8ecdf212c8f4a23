#include "jitid/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "jitid/astdiff.hpp"
#include "jitid/javadoc.hpp"

namespace jitid::corpus {

std::string param_name_of(const Example& ex) {
    if (ex.comment_type != lex::CommentType::Param) return "";
    std::istringstream words(ex.comment_raw);
    std::string tag, name;
    words >> tag >> name;
    return tag == "@param" ? name : "";
}

// ---------------------------------------------------------------------------
// readers
// ---------------------------------------------------------------------------

struct JsonlReplayReader::Impl {
    std::ifstream in;
    std::string path;
    size_t line_no = 0;
};

JsonlReplayReader::JsonlReplayReader(const std::string& path)
    : impl_(std::make_unique<Impl>()) {
    impl_->in.open(path);
    impl_->path = path;
    if (!impl_->in) throw ReaderError("cannot open replay file: " + path);
}

JsonlReplayReader::~JsonlReplayReader() = default;

bool JsonlReplayReader::next(MethodChangeRecord& out) {
    std::string line;
    while (std::getline(impl_->in, line)) {
        ++impl_->line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            out.project = j.at("project").get<std::string>();
            out.commit_old = j.at("commit_old").get<std::string>();
            out.commit_new = j.at("commit_new").get<std::string>();
            out.file = j.value("file", "");
            out.doc_old = j.at("doc_old").get<std::string>();
            out.doc_new = j.at("doc_new").get<std::string>();
            out.m_old = j.at("m_old").get<std::string>();
            out.m_new = j.at("m_new").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ReaderError(impl_->path + ":" + std::to_string(impl_->line_no) +
                              ": " + e.what());
        }
        return true;
    }
    return false;
}

namespace {

std::string run_command(const std::string& command, bool& ok) {
    std::string output;
    FILE* pipe = popen((command + " 2>/dev/null").c_str(), "r");
    if (!pipe) {
        ok = false;
        return output;
    }
    std::array<char, 4096> buffer;
    size_t got;
    while ((got = fread(buffer.data(), 1, buffer.size(), pipe)) > 0)
        output.append(buffer.data(), got);
    ok = pclose(pipe) == 0;
    return output;
}

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out.push_back(c);
    }
    out.push_back('\'');
    return out;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

}   // namespace

struct GitHistoryReader::Impl {
    std::string repo;
    std::string project;
    std::vector<std::string> commits;
    size_t pair_index = 0;   // (commits[i], commits[i+1])
    std::vector<MethodChangeRecord> pending;

    std::string git(const std::string& args, bool& ok) const {
        return run_command("git -C " + shell_quote(repo) + " " + args, ok);
    }

    bool refill() {
        while (pending.empty()) {
            if (pair_index + 1 >= commits.size()) return false;
            const std::string& c1 = commits[pair_index];
            const std::string& c2 = commits[pair_index + 1];
            ++pair_index;

            bool ok = false;
            std::string diff = git("diff --name-only " + c1 + " " + c2, ok);
            if (!ok) throw ReaderError("git diff failed for " + c1 + ".." + c2);
            for (const std::string& file : split_lines(diff)) {
                if (!file.ends_with(".java")) continue;
                bool ok_old = false, ok_new = false;
                std::string src_old = git("show " + c1 + ":" + shell_quote(file), ok_old);
                std::string src_new = git("show " + c2 + ":" + shell_quote(file), ok_new);
                if (!ok_old || !ok_new) continue;   // added or deleted file

                auto methods_old = javadoc::extract_documented_methods(src_old);
                auto methods_new = javadoc::extract_documented_methods(src_new);
                std::map<std::string, const javadoc::ExtractedMethod*> by_key;
                for (const auto& m : methods_new) by_key.emplace(m.key, &m);

                for (const auto& m1 : methods_old) {
                    auto it = by_key.find(m1.key);
                    if (it == by_key.end()) continue;
                    MethodChangeRecord rec;
                    rec.project = project;
                    rec.commit_old = c1;
                    rec.commit_new = c2;
                    rec.file = file;
                    rec.doc_old = m1.doc;
                    rec.doc_new = it->second->doc;
                    rec.m_old = m1.source;
                    rec.m_new = it->second->source;
                    pending.push_back(std::move(rec));
                }
            }
        }
        return true;
    }
};

GitHistoryReader::GitHistoryReader(const std::string& repo_path, std::string project_name)
    : impl_(std::make_unique<Impl>()) {
    impl_->repo = repo_path;
    if (project_name.empty()) {
        size_t slash = repo_path.find_last_of('/');
        project_name = slash == std::string::npos ? repo_path : repo_path.substr(slash + 1);
    }
    impl_->project = std::move(project_name);

    bool ok = false;
    std::string list = impl_->git("rev-list --first-parent --reverse HEAD", ok);
    if (!ok) throw ReaderError("cannot list commits of " + repo_path);
    impl_->commits = split_lines(list);
}

GitHistoryReader::~GitHistoryReader() = default;

bool GitHistoryReader::next(MethodChangeRecord& out) {
    if (!impl_->refill()) return false;
    out = std::move(impl_->pending.front());
    impl_->pending.erase(impl_->pending.begin());
    return true;
}

// ---------------------------------------------------------------------------
// pair extraction / labeling
// ---------------------------------------------------------------------------

namespace {

bool method_tokens_differ(const std::string& m1, const std::string& m2) {
    try {
        return lex::code_subtokens(lex::tokenize_code(m1)) !=
               lex::code_subtokens(lex::tokenize_code(m2));
    } catch (const lex::LexError&) {
        return false;   // unlexable methods cannot form examples
    }
}

std::string normalize_comment(const std::string& raw) {
    std::string stripped = javadoc::strip_doc_markers(raw);
    std::string out;
    bool in_ws = false;
    for (char c : stripped) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) out.push_back(' ');
        in_ws = false;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

}   // namespace

std::vector<RawPair> extract_commit_pairs(CommitHistoryReader& history) {
    std::vector<RawPair> pairs;
    MethodChangeRecord rec;
    while (history.next(rec)) {
        if (!method_tokens_differ(rec.m_old, rec.m_new)) continue;

        auto units_old = javadoc::split_comment_units(rec.doc_old);
        auto units_new = javadoc::split_comment_units(rec.doc_new);
        for (const auto& u1 : units_old) {
            const javadoc::CommentUnit* partner = nullptr;
            for (const auto& u2 : units_new) {
                if (u2.type != u1.type) continue;
                if (u1.type == lex::CommentType::Param && u2.param_name != u1.param_name)
                    continue;
                partner = &u2;
                break;
            }
            if (!partner) continue;   // unit no longer exists, nothing to label

            RawPair pair;
            pair.project = rec.project;
            pair.commit_old = rec.commit_old;
            pair.commit_new = rec.commit_new;
            pair.type = u1.type;
            pair.param_name = u1.param_name;
            pair.c1 = u1.text;
            pair.c2 = partner->text;
            pair.m1 = rec.m_old;
            pair.m2 = rec.m_new;
            pairs.push_back(std::move(pair));
        }
    }
    return pairs;
}

Example label_pair(const RawPair& pair) {
    Example ex;
    ex.project = pair.project;
    ex.comment_type = pair.type;
    ex.comment_raw = pair.c1;
    ex.m_old_raw = pair.m1;
    ex.m_new_raw = pair.m2;
    ex.commit_old = pair.commit_old;
    ex.commit_new = pair.commit_new;

    bool changed = normalize_comment(pair.c1) != normalize_comment(pair.c2);
    ex.label = changed ? Label::Inconsistent : Label::Consistent;
    if (changed) ex.c_new_raw = pair.c2;

    // deterministic id from the pair's identity
    uint64_t h = 1469598103934665603ull;
    for (const std::string* part : {&pair.project, &pair.commit_new, &pair.c1, &pair.m2}) {
        for (char c : *part) h = (h ^ static_cast<uint8_t>(c)) * 1099511628211ull;
    }
    h = (h ^ static_cast<uint64_t>(pair.type)) * 1099511628211ull;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    ex.id = pair.project + ":" + std::string(lex::to_string(pair.type)) + ":" + buf;
    return ex;
}

// ---------------------------------------------------------------------------
// filters
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> comment_words(const std::string& raw) {
    std::vector<std::string> words;
    std::string current;
    for (char c : javadoc::strip_doc_markers(raw)) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= b.size(); ++j) {
            size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

/** Case, punctuation, whitespace or per-word spelling-distance deltas. */
bool is_cosmetic_delta(const std::string& c1, const std::string& c2,
                       const FilterOptions& options) {
    std::vector<std::string> w1 = comment_words(c1);
    std::vector<std::string> w2 = comment_words(c2);
    if (w1 == w2) return true;   // punctuation or formatting only
    if (w1.size() != w2.size()) return false;
    for (size_t i = 0; i < w1.size(); ++i) {
        if (w1[i] == w2[i]) continue;
        if (levenshtein(w1[i], w2[i]) >
            static_cast<size_t>(options.spelling_max_distance))
            return false;
    }
    return true;
}

}   // namespace

std::optional<DropReason> filter_example(const Example& ex, const FilterOptions& options) {
    astdiff::AstTree t_old, t_new;
    try {
        t_old = astdiff::parse_method(ex.m_old_raw);
        t_new = astdiff::parse_method(ex.m_new_raw);
    } catch (const astdiff::ParseError&) {
        return DropReason::Unparseable;
    }

    if (ex.label == Label::Inconsistent && ex.c_new_raw &&
        is_cosmetic_delta(ex.comment_raw, *ex.c_new_raw, options))
        return DropReason::Cosmetic;

    astdiff::MethodShape s_old = astdiff::method_shape(t_old);
    astdiff::MethodShape s_new = astdiff::method_shape(t_new);

    if (ex.comment_type == lex::CommentType::Return ||
        ex.comment_type == lex::CommentType::Summary) {
        bool type_changed = s_old.full_return_type_tokens != s_new.full_return_type_tokens;
        auto sorted = [](std::vector<std::vector<std::string>> v) {
            std::sort(v.begin(), v.end());
            return v;
        };
        bool returns_changed =
            sorted(s_old.return_statements) != sorted(s_new.return_statements);
        if (!type_changed && !returns_changed) return DropReason::ReturnGate;
    } else {
        bool params_changed = s_old.parameters.size() != s_new.parameters.size();
        for (size_t i = 0; !params_changed && i < s_old.parameters.size(); ++i)
            params_changed = s_old.parameters[i].type_tokens !=
                                 s_new.parameters[i].type_tokens ||
                             s_old.parameters[i].name != s_new.parameters[i].name;
        if (!params_changed) return DropReason::ParamGate;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// dedup
// ---------------------------------------------------------------------------

namespace {

std::string content_key(const Example& ex) {
    std::string key;
    auto append_tokens = [&key](const std::vector<std::string>& toks) {
        for (const auto& t : toks) {
            key += t;
            key.push_back('\x1e');
        }
        key.push_back('\x1f');
    };
    try {
        auto seq = lex::tokenize_comment(
            ex.comment_raw, ex.comment_type,
            ex.comment_type == lex::CommentType::Param
                ? std::optional<std::string>(param_name_of(ex))
                : std::nullopt);
        append_tokens(seq.texts());
    } catch (const lex::EmptyComment&) {
        key += ex.comment_raw;
        key.push_back('\x1f');
    }
    for (const std::string* m : {&ex.m_old_raw, &ex.m_new_raw}) {
        try {
            append_tokens(lex::code_subtokens(lex::tokenize_code(*m)));
        } catch (const lex::LexError&) {
            key += *m;
            key.push_back('\x1f');
        }
    }
    return key;
}

}   // namespace

DedupResult deduplicate(const std::vector<Example>& examples) {
    DedupResult result;
    std::set<std::string> seen;                            // content + label
    std::map<std::string, std::set<Label>> content_labels; // content -> labels seen
    for (const Example& ex : examples) {
        std::string key = content_key(ex);
        if (!seen.insert(key + to_string(ex.label)).second) {
            ++result.duplicates_dropped;
            continue;
        }
        auto& labels = content_labels[key];
        labels.insert(ex.label);
        if (labels.size() > 1) result.label_conflicts.push_back(ex.id);
        result.kept.push_back(ex);
    }
    return result;
}

// ---------------------------------------------------------------------------
// splits
// ---------------------------------------------------------------------------

namespace {

// published partition ratios: 32,988 / 3,756 / 3,944 examples
constexpr double kTrainFrac = 32988.0 / 40688.0;
constexpr double kValidFrac = 3756.0 / 40688.0;
constexpr double kTestFrac = 3944.0 / 40688.0;

}   // namespace

DatasetSplit build_splits(const std::vector<Example>& examples, uint64_t seed) {
    std::map<std::string, std::vector<Example>> by_project;
    std::set<lex::CommentType> types_present;
    for (const Example& ex : examples) {
        by_project[ex.project].push_back(ex);
        types_present.insert(ex.comment_type);
    }
    if (by_project.size() < 3)
        throw InsufficientData("need at least 3 projects for disjoint partitions, have " +
                               std::to_string(by_project.size()));

    std::vector<std::string> projects;
    for (const auto& [name, _] : by_project) projects.push_back(name);
    std::mt19937_64 rng(seed);
    std::shuffle(projects.begin(), projects.end(), rng);
    std::stable_sort(projects.begin(), projects.end(),
                     [&](const std::string& a, const std::string& b) {
                         return by_project[a].size() > by_project[b].size();
                     });

    const double total = static_cast<double>(examples.size());
    const std::array<double, 3> targets = {kTrainFrac * total, kValidFrac * total,
                                           kTestFrac * total};
    std::array<double, 3> assigned = {0, 0, 0};
    DatasetSplit split;
    std::array<std::vector<Example>*, 3> parts = {&split.train, &split.valid, &split.test};
    static const std::array<const char*, 3> part_names = {"train", "valid", "test"};

    for (const std::string& project : projects) {
        // relative deficit, so valid/test claim projects early enough even
        // though train's absolute target dwarfs theirs
        size_t best = 0;
        double best_deficit = (targets[0] - assigned[0]) / targets[0];
        for (size_t p = 1; p < 3; ++p) {
            double deficit = (targets[p] - assigned[p]) / targets[p];
            if (deficit > best_deficit) {
                best_deficit = deficit;
                best = p;
            }
        }
        auto& bucket = by_project[project];
        parts[best]->insert(parts[best]->end(), bucket.begin(), bucket.end());
        assigned[best] += static_cast<double>(bucket.size());
        split.project_partition[project] = part_names[best];
    }

    // balance positives and negatives per partition and comment type
    for (size_t p = 0; p < 3; ++p) {
        std::vector<Example>& part = *parts[p];
        std::vector<Example> balanced;
        for (lex::CommentType type : types_present) {
            std::vector<Example> pos, neg;
            for (const Example& ex : part) {
                if (ex.comment_type != type) continue;
                (ex.label == Label::Inconsistent ? pos : neg).push_back(ex);
            }
            if (pos.empty() || neg.empty())
                throw InsufficientData(std::string("partition ") + part_names[p] +
                                       " has an empty " + lex::to_string(type) +
                                       " label cell");
            std::mt19937_64 cell_rng(seed ^ (0x9e3779b97f4a7c15ull * (p + 1)) ^
                                     static_cast<uint64_t>(type));
            std::vector<Example>& larger = pos.size() > neg.size() ? pos : neg;
            const size_t want = std::min(pos.size(), neg.size());
            std::vector<Example> sampled;
            std::sample(larger.begin(), larger.end(), std::back_inserter(sampled), want,
                        cell_rng);
            larger = std::move(sampled);
            balanced.insert(balanced.end(), pos.begin(), pos.end());
            balanced.insert(balanced.end(), neg.begin(), neg.end());
        }
        part = std::move(balanced);
    }
    return split;
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

std::string example_to_json(const Example& ex) {
    nlohmann::json j;
    j["id"] = ex.id;
    j["project"] = ex.project;
    j["comment_type"] = lex::to_string(ex.comment_type);
    j["comment_raw"] = ex.comment_raw;
    j["m_old_raw"] = ex.m_old_raw;
    j["m_new_raw"] = ex.m_new_raw;
    j["label"] = to_string(ex.label);
    if (ex.c_new_raw) j["c_new_raw"] = *ex.c_new_raw;
    j["commit_old"] = ex.commit_old;
    j["commit_new"] = ex.commit_new;
    return j.dump();
}

Example example_from_json(const std::string& json_line) {
    nlohmann::json j = nlohmann::json::parse(json_line);
    Example ex;
    ex.id = j.at("id").get<std::string>();
    ex.project = j.at("project").get<std::string>();
    ex.comment_type = lex::comment_type_from_string(j.at("comment_type").get<std::string>());
    ex.comment_raw = j.at("comment_raw").get<std::string>();
    ex.m_old_raw = j.at("m_old_raw").get<std::string>();
    ex.m_new_raw = j.at("m_new_raw").get<std::string>();
    ex.label = label_from_string(j.at("label").get<std::string>());
    if (j.contains("c_new_raw")) ex.c_new_raw = j.at("c_new_raw").get<std::string>();
    ex.commit_old = j.at("commit_old").get<std::string>();
    ex.commit_new = j.at("commit_new").get<std::string>();
    return ex;
}

std::vector<Example> read_examples_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    std::vector<Example> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(example_from_json(line));
    }
    return out;
}

void write_examples_jsonl(const std::string& path, const std::vector<Example>& examples) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    for (const Example& ex : examples) out << example_to_json(ex) << '\n';
}

std::string split_manifest_json(const DatasetSplit& split) {
    nlohmann::json j;
    for (const auto& [project, part] : split.project_partition) j[project] = part;
    return j.dump(2);
}

std::vector<Example> mine_examples(CommitHistoryReader& history, MineStats& stats,
                                   const FilterOptions& options) {
    std::vector<RawPair> pairs = extract_commit_pairs(history);
    stats.raw_pairs = pairs.size();

    std::vector<Example> labeled;
    labeled.reserve(pairs.size());
    for (const RawPair& pair : pairs) labeled.push_back(label_pair(pair));

    std::vector<Example> kept;
    for (const Example& ex : labeled) {
        if (auto reason = filter_example(ex, options)) {
            ++stats.dropped[to_string(*reason)];
            continue;
        }
        kept.push_back(ex);
    }

    DedupResult dedup = deduplicate(kept);
    stats.duplicates = dedup.duplicates_dropped;
    stats.kept = dedup.kept.size();
    return std::move(dedup.kept);
}

const char* to_string(DropReason r) {
    switch (r) {
        case DropReason::Unparseable: return "unparseable";
        case DropReason::Cosmetic: return "cosmetic";
        case DropReason::ReturnGate: return "return-gate";
        case DropReason::ParamGate: return "param-gate";
    }
    return "?";
}

const char* to_string(Label l) {
    return l == Label::Inconsistent ? "inconsistent" : "consistent";
}

Label label_from_string(std::string_view s) {
    if (s == "inconsistent") return Label::Inconsistent;
    if (s == "consistent") return Label::Consistent;
    throw std::invalid_argument("unknown label: " + std::string(s));
}

}   // namespace jitid::corpus
