#ifndef JITID_CORPUS_HPP
#define JITID_CORPUS_HPP

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jitid/lex.hpp"

namespace jitid::corpus {

enum class Label { Consistent, Inconsistent };

struct Example {
    std::string id;
    std::string project;
    lex::CommentType comment_type;
    std::string comment_raw;              // C, tag markers retained
    std::string m_old_raw;                // M_old
    std::string m_new_raw;                // M
    Label label;
    std::optional<std::string> c_new_raw; // gold updated comment, positives only
    std::string commit_old;
    std::string commit_new;
};

/** For @param examples, the documented parameter name (first word after the
 *  tag); empty for other comment types. */
std::string param_name_of(const Example& ex);

// ---------------------------------------------------------------------------
// mining
// ---------------------------------------------------------------------------

/** One method whose body or signature changed between consecutive commits,
 *  with the doc comment attached to each version. */
struct MethodChangeRecord {
    std::string project;
    std::string commit_old;
    std::string commit_new;
    std::string file;
    std::string doc_old;
    std::string doc_new;
    std::string m_old;
    std::string m_new;
};

class ReaderError : public std::runtime_error {
public:
    explicit ReaderError(const std::string& what) : std::runtime_error(what) {}
};

class CommitHistoryReader {
public:
    virtual ~CommitHistoryReader() = default;
    virtual bool next(MethodChangeRecord& out) = 0;
};

/** Replays MethodChangeRecords from a JSONL file, one object per line. */
class JsonlReplayReader final : public CommitHistoryReader {
public:
    explicit JsonlReplayReader(const std::string& path);
    ~JsonlReplayReader() override;
    bool next(MethodChangeRecord& out) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/** Walks consecutive first-parent commits of a local git repository and
 *  extracts changed, documented methods from touched .java files. */
class GitHistoryReader final : public CommitHistoryReader {
public:
    explicit GitHistoryReader(const std::string& repo_path,
                              std::string project_name = "");
    ~GitHistoryReader() override;
    bool next(MethodChangeRecord& out) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/** One raw (C1,M1),(C2,M2) pair for a single comment unit. */
struct RawPair {
    std::string project;
    std::string commit_old;
    std::string commit_new;
    lex::CommentType type;
    std::optional<std::string> param_name;
    std::string c1;
    std::string c2;
    std::string m1;
    std::string m2;
};

/** One raw pair per (changed method, comment unit present in both versions).
 *  Methods whose token streams did not change are skipped. */
std::vector<RawPair> extract_commit_pairs(CommitHistoryReader& history);

/** Positive iff the normalized comments differ (whitespace collapsed, doc
 *  sigils stripped, case-insensitive). */
Example label_pair(const RawPair& pair);

// ---------------------------------------------------------------------------
// filtering / dedup / splits
// ---------------------------------------------------------------------------

enum class DropReason { Unparseable, Cosmetic, ReturnGate, ParamGate };
const char* to_string(DropReason r);

struct FilterOptions {
    int spelling_max_distance = 2;   // per-word Levenshtein for "spelling fix"
};

/** nullopt = keep; otherwise the one machine-readable reason to drop. */
std::optional<DropReason> filter_example(const Example& ex,
                                         const FilterOptions& options = {});

struct DedupResult {
    std::vector<Example> kept;
    size_t duplicates_dropped = 0;
    std::vector<std::string> label_conflicts;   // ids kept despite twin labels
};

/** Drops exact duplicates of (comment subtokens, M_old subtokens, M
 *  subtokens, label); first occurrence wins. Identical content with opposite
 *  labels is retained and flagged for audit. */
DedupResult deduplicate(const std::vector<Example>& examples);

class InsufficientData : public std::runtime_error {
public:
    explicit InsufficientData(const std::string& what) : std::runtime_error(what) {}
};

struct DatasetSplit {
    std::vector<Example> train;
    std::vector<Example> valid;
    std::vector<Example> test;
    std::map<std::string, std::string> project_partition;
};

/** Seeded project-disjoint partition targeting the published example ratios,
 *  with the larger label downsampled per partition and comment type until
 *  positives and negatives balance exactly. */
DatasetSplit build_splits(const std::vector<Example>& examples, uint64_t seed);

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

std::string example_to_json(const Example& ex);
Example example_from_json(const std::string& json_line);
std::vector<Example> read_examples_jsonl(const std::string& path);
void write_examples_jsonl(const std::string& path, const std::vector<Example>& examples);
std::string split_manifest_json(const DatasetSplit& split);

struct MineStats {
    size_t raw_pairs = 0;
    std::map<std::string, size_t> dropped;
    size_t duplicates = 0;
    size_t kept = 0;
};

/** Full pipeline: extract, label, filter, deduplicate. */
std::vector<Example> mine_examples(CommitHistoryReader& history, MineStats& stats,
                                   const FilterOptions& options = {});

const char* to_string(Label l);
Label label_from_string(std::string_view s);

}   // namespace jitid::corpus

#endif
