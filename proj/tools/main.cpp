#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jitid/baselines.hpp"
#include "jitid/corpus.hpp"
#include "jitid/eval.hpp"
#include "jitid/javadoc.hpp"
#include "jitid/model.hpp"

namespace fs = std::filesystem;
using namespace jitid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInconsistent = 1;   // only with --fail-on-inconsistent
constexpr int kExitIo = 2;
constexpr int kExitPreprocess = 3;

std::vector<std::string> expand_repo_list(const std::vector<std::string>& entries) {
    std::vector<std::string> repos;
    for (const std::string& entry : entries) {
        if (fs::is_regular_file(entry) && !entry.ends_with(".jsonl")) {
            // a manifest: one repository or replay file per line
            std::ifstream in(entry);
            std::string line;
            while (std::getline(in, line)) {
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (!line.empty() && line[0] != '#') repos.push_back(line);
            }
        } else {
            repos.push_back(entry);
        }
    }
    return repos;
}

int cmd_mine(const std::vector<std::string>& repo_entries, const std::string& out_path,
             uint64_t seed) {
    (void)seed;   // mining is deterministic; the flag is accepted for symmetry
    std::vector<std::string> repos = expand_repo_list(repo_entries);
    if (repos.empty()) {
        std::cerr << "mine: no repositories given\n";
        return kExitIo;
    }

    std::vector<corpus::Example> all;
    corpus::MineStats totals;
    try {
        for (const std::string& repo : repos) {
            std::unique_ptr<corpus::CommitHistoryReader> reader;
            if (repo.ends_with(".jsonl"))
                reader = std::make_unique<corpus::JsonlReplayReader>(repo);
            else
                reader = std::make_unique<corpus::GitHistoryReader>(repo);
            corpus::MineStats stats;
            auto examples = corpus::mine_examples(*reader, stats);
            all.insert(all.end(), examples.begin(), examples.end());
            totals.raw_pairs += stats.raw_pairs;
            totals.duplicates += stats.duplicates;
            for (const auto& [reason, n] : stats.dropped) totals.dropped[reason] += n;
        }
    } catch (const corpus::ReaderError& e) {
        std::cerr << "mine: " << e.what() << "\n";
        return kExitIo;
    }
    totals.kept = all.size();

    try {
        corpus::write_examples_jsonl(out_path, all);
    } catch (const std::exception& e) {
        std::cerr << "mine: " << e.what() << "\n";
        return kExitIo;
    }

    nlohmann::json summary;
    summary["raw_pairs"] = totals.raw_pairs;
    summary["kept"] = totals.kept;
    summary["duplicates_dropped"] = totals.duplicates;
    summary["dropped"] = totals.dropped;
    std::cout << summary.dump(2) << "\n";
    return kExitOk;
}

int cmd_build_dataset(const std::string& in_path, const std::string& out_dir,
                      uint64_t seed) {
    try {
        std::vector<corpus::Example> examples = corpus::read_examples_jsonl(in_path);
        corpus::DatasetSplit split = corpus::build_splits(examples, seed);
        fs::create_directories(out_dir);
        corpus::write_examples_jsonl((fs::path(out_dir) / "train.jsonl").string(),
                                     split.train);
        corpus::write_examples_jsonl((fs::path(out_dir) / "valid.jsonl").string(),
                                     split.valid);
        corpus::write_examples_jsonl((fs::path(out_dir) / "test.jsonl").string(),
                                     split.test);
        std::ofstream manifest(fs::path(out_dir) / "manifest.json");
        manifest << corpus::split_manifest_json(split) << "\n";

        nlohmann::json summary;
        summary["train"] = split.train.size();
        summary["valid"] = split.valid.size();
        summary["test"] = split.test.size();
        summary["projects"] = split.project_partition.size();
        std::cout << summary.dump(2) << "\n";
    } catch (const std::exception& e) {
        std::cerr << "build-dataset: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}

corpus::DatasetSplit load_split_dir(const std::string& data_dir) {
    corpus::DatasetSplit split;
    split.train = corpus::read_examples_jsonl((fs::path(data_dir) / "train.jsonl").string());
    split.valid = corpus::read_examples_jsonl((fs::path(data_dir) / "valid.jsonl").string());
    split.test = corpus::read_examples_jsonl((fs::path(data_dir) / "test.jsonl").string());
    return split;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_checkpoint, const std::string& embeddings_path,
              std::optional<uint64_t> seed_override) {
    try {
        std::ifstream cfg(config_path);
        if (!cfg) {
            std::cerr << "train: cannot open config " << config_path << "\n";
            return kExitIo;
        }
        std::stringstream buffer;
        buffer << cfg.rdbuf();
        model::ModelConfig config = model::ModelConfig::from_json(buffer.str());
        if (seed_override) config.seed = *seed_override;

        corpus::DatasetSplit split = load_split_dir(data_dir);

        std::optional<baselines::EmbeddingTable> table;
        if (!embeddings_path.empty())
            table = baselines::load_embedding_table(embeddings_path);

        model::TrainResult result =
            model::train(config, split, table ? &*table : nullptr);
        for (const auto& entry : result.log)
            std::cout << "epoch " << entry.epoch << " train_loss " << entry.train_loss
                      << " valid_f1 " << entry.valid.f1 << " valid_acc "
                      << entry.valid.accuracy << "\n";
        std::cout << "best epoch " << result.best_epoch << " valid_f1 "
                  << result.best_valid_f1 << "\n";
        if (result.skipped_train + result.skipped_valid > 0)
            std::cerr << "train: skipped " << result.skipped_train << " train / "
                      << result.skipped_valid << " valid examples during preprocessing\n";
        if (result.truncated_train > 0)
            std::cerr << "train: " << result.truncated_train
                      << " training inputs truncated at the position/node caps\n";
        result.detector.save(out_checkpoint);
    } catch (const model::PreprocessError& e) {
        std::cerr << "train: preprocessing failed at " << e.stage << ": " << e.what() << "\n";
        return kExitPreprocess;
    } catch (const std::exception& e) {
        std::cerr << "train: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}

struct SplitView {
    std::vector<corpus::Example> examples;
};

int cmd_evaluate(const std::string& checkpoint, const std::string& baseline,
                 const std::string& data_dir, const std::string& split_name,
                 const std::string& mode_name, const std::string& embeddings_path,
                 const std::string& report_path, uint64_t seed) {
    try {
        corpus::DatasetSplit split = load_split_dir(data_dir);
        const std::vector<corpus::Example>* eval_set = &split.test;
        if (split_name == "train") eval_set = &split.train;
        else if (split_name == "valid") eval_set = &split.valid;
        else if (split_name != "test") {
            std::cerr << "evaluate: unknown split " << split_name << "\n";
            return kExitIo;
        }

        std::vector<corpus::Label> preds, golds;
        std::vector<lex::CommentType> types;
        size_t skipped = 0;
        auto push = [&](const corpus::Example& ex, corpus::Label pred) {
            preds.push_back(pred);
            golds.push_back(ex.label);
            types.push_back(ex.comment_type);
        };

        if (!checkpoint.empty()) {
            model::Detector detector = model::Detector::load(checkpoint);
            for (const corpus::Example& ex : *eval_set) {
                try {
                    push(ex, model::predict(detector, ex).first);
                } catch (const model::PreprocessError&) {
                    ++skipped;
                }
            }
        } else if (baseline == "overlap") {
            for (const corpus::Example& ex : *eval_set) {
                try {
                    auto comment = lex::tokenize_comment(
                        ex.comment_raw, ex.comment_type,
                        ex.comment_type == lex::CommentType::Param
                            ? std::optional<std::string>(corpus::param_name_of(ex))
                            : std::nullopt);
                    push(ex, baselines::overlap_baseline(comment,
                                                         baselines::edit_script_of(ex)));
                } catch (const std::exception&) {
                    ++skipped;
                }
            }
        } else if (baseline == "tfidf" || baseline == "bow") {
            baselines::Mode mode = baselines::mode_from_string(mode_name);
            if (baseline == "tfidf") {
                baselines::TfidfOptions options;
                options.seed = seed;
                auto mdl = baselines::fit_tfidf(split.train, mode, options);
                for (const corpus::Example& ex : *eval_set) {
                    try {
                        push(ex, baselines::predict_tfidf(mdl, ex));
                    } catch (const std::exception&) {
                        ++skipped;
                    }
                }
            } else {
                if (embeddings_path.empty()) {
                    std::cerr << "evaluate: --baseline bow requires --embeddings\n";
                    return kExitIo;
                }
                auto table = baselines::load_embedding_table(embeddings_path);
                baselines::BowOptions options;
                options.seed = seed;
                auto mdl = baselines::fit_bow_embedding(split.train, table, mode, options);
                for (const corpus::Example& ex : *eval_set) {
                    try {
                        push(ex, baselines::predict_bow(mdl, ex).first);
                    } catch (const std::exception&) {
                        ++skipped;
                    }
                }
            }
        } else if (baseline == "return-prefix" || baseline == "param-prefix") {
            lex::CommentType wanted = baseline == "return-prefix"
                                          ? lex::CommentType::Return
                                          : lex::CommentType::Param;
            for (const corpus::Example& ex : *eval_set) {
                if (ex.comment_type != wanted) continue;
                try {
                    auto comment = lex::tokenize_comment(
                        ex.comment_raw, ex.comment_type,
                        wanted == lex::CommentType::Param
                            ? std::optional<std::string>(corpus::param_name_of(ex))
                            : std::nullopt);
                    auto shape =
                        astdiff::method_shape(astdiff::parse_method(ex.m_new_raw));
                    corpus::Label pred =
                        wanted == lex::CommentType::Return
                            ? baselines::return_prefix_heuristic(comment, shape)
                            : baselines::param_prefix_heuristic(comment, shape);
                    push(ex, pred);
                } catch (const std::exception&) {
                    ++skipped;
                }
            }
        } else {
            std::cerr << "evaluate: pass --checkpoint or a known --baseline "
                         "(overlap, tfidf, bow, return-prefix, param-prefix)\n";
            return kExitIo;
        }

        if (preds.empty()) {
            std::cerr << "evaluate: nothing to score\n";
            return kExitIo;
        }
        eval::MetricsReport report = eval::compute_metrics(preds, golds, types);
        std::string json = eval::report_to_json(report);
        if (!report_path.empty()) {
            std::ofstream out(report_path);
            if (!out) {
                std::cerr << "evaluate: cannot write " << report_path << "\n";
                return kExitIo;
            }
            out << json << "\n";
        }
        std::cout << json << "\n";
        if (skipped > 0) std::cerr << "evaluate: skipped " << skipped << " examples\n";
    } catch (const std::exception& e) {
        std::cerr << "evaluate: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}

int cmd_predict(const std::string& checkpoint, const std::string& old_file,
                const std::string& new_file, bool fail_on_inconsistent) {
    std::string old_src, new_src;
    {
        std::ifstream in_old(old_file), in_new(new_file);
        if (!in_old || !in_new) {
            std::cerr << "predict: cannot open input files\n";
            return kExitIo;
        }
        std::stringstream so, sn;
        so << in_old.rdbuf();
        sn << in_new.rdbuf();
        old_src = so.str();
        new_src = sn.str();
    }

    std::unique_ptr<model::Detector> detector;
    try {
        detector = std::make_unique<model::Detector>(model::Detector::load(checkpoint));
    } catch (const std::exception& e) {
        std::cerr << "predict: " << e.what() << "\n";
        return kExitIo;
    }

    auto methods_old = javadoc::extract_documented_methods(old_src);
    auto methods_new = javadoc::extract_documented_methods(new_src);
    std::map<std::string, const javadoc::ExtractedMethod*> new_by_key;
    for (const auto& m : methods_new) new_by_key.emplace(m.key, &m);

    nlohmann::json verdicts = nlohmann::json::array();
    bool any_inconsistent = false;
    bool any_preprocess_error = false;
    for (const auto& m_old : methods_old) {
        auto it = new_by_key.find(m_old.key);
        if (it == new_by_key.end()) {
            std::cerr << "predict: method " << m_old.key
                      << " not found in the new file, skipped\n";
            continue;
        }
        for (const auto& unit : javadoc::split_comment_units(m_old.doc)) {
            corpus::Example ex;
            ex.id = m_old.key;
            ex.project = "local";
            ex.comment_type = unit.type;
            ex.comment_raw = unit.text;
            ex.m_old_raw = m_old.source;
            ex.m_new_raw = it->second->source;
            ex.label = corpus::Label::Consistent;

            nlohmann::json v;
            v["method"] = m_old.key;
            v["comment_type"] = lex::to_string(unit.type);
            if (unit.param_name) v["param_name"] = *unit.param_name;
            v["span"] = unit.text;
            try {
                auto [label, probability] = model::predict(*detector, ex);
                v["probability"] = probability;
                v["label"] = corpus::to_string(label);
                any_inconsistent |= label == corpus::Label::Inconsistent;
            } catch (const model::PreprocessError& e) {
                v["error"] = std::string(e.stage) + ": " + e.what();
                any_preprocess_error = true;
            }
            verdicts.push_back(std::move(v));
        }
    }
    std::cout << verdicts.dump(2) << "\n";
    if (any_preprocess_error) return kExitPreprocess;
    if (fail_on_inconsistent && any_inconsistent) return kExitInconsistent;
    return kExitOk;
}

}   // namespace

int main(int argc, char** argv) {
    CLI::App app{"just-in-time code/comment inconsistency detection"};
    app.require_subcommand(1);

    // mine
    auto* mine = app.add_subcommand("mine", "mine labeled examples from repositories");
    std::vector<std::string> repo_entries;
    std::string mine_out;
    uint64_t mine_seed = 0;
    mine->add_option("--repos", repo_entries,
                     "git repositories, replay .jsonl files, or a manifest file")
        ->required();
    mine->add_option("--out", mine_out, "output dataset JSONL")->required();
    mine->add_option("--seed", mine_seed, "random seed");

    // build-dataset
    auto* build = app.add_subcommand("build-dataset", "split mined examples into "
                                                      "balanced cross-project partitions");
    std::string build_in, build_out_dir;
    uint64_t build_seed = 0;
    build->add_option("--in", build_in, "mined examples JSONL")->required();
    build->add_option("--out-dir", build_out_dir, "output directory")->required();
    build->add_option("--seed", build_seed, "random seed");

    // train
    auto* train_cmd = app.add_subcommand("train", "train a detector");
    std::string train_config, train_data_dir, train_ckpt, train_embeddings;
    std::optional<uint64_t> train_seed;
    train_cmd->add_option("--config", train_config, "model config JSON")->required();
    train_cmd->add_option("--data-dir", train_data_dir, "dataset directory")->required();
    train_cmd->add_option("--out-checkpoint", train_ckpt, "checkpoint path")->required();
    train_cmd->add_option("--embeddings", train_embeddings, "pretrained embedding table");
    uint64_t train_seed_value = 0;
    auto* seed_opt = train_cmd->add_option("--seed", train_seed_value,
                                           "override the config seed");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint or baseline");
    std::string eval_ckpt, eval_baseline, eval_data_dir, eval_split = "test";
    std::string eval_mode = "jit", eval_embeddings, eval_report;
    uint64_t eval_seed = 0;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "trained checkpoint");
    eval_cmd->add_option("--baseline", eval_baseline,
                         "overlap | tfidf | bow | return-prefix | param-prefix");
    eval_cmd->add_option("--data-dir", eval_data_dir, "dataset directory")->required();
    eval_cmd->add_option("--split", eval_split, "train | valid | test");
    eval_cmd->add_option("--mode", eval_mode, "posthoc | jit (for tfidf/bow)");
    eval_cmd->add_option("--embeddings", eval_embeddings, "embedding table for bow");
    eval_cmd->add_option("--report", eval_report, "report JSON path");
    eval_cmd->add_option("--seed", eval_seed, "random seed");

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "score the comment units of a "
                                                      "changed method");
    std::string pred_ckpt, pred_old, pred_new;
    bool fail_on_inconsistent = false;
    predict_cmd->add_option("--checkpoint", pred_ckpt, "trained checkpoint")->required();
    predict_cmd->add_option("--old-file", pred_old, "file with the old method version")
        ->required();
    predict_cmd->add_option("--new-file", pred_new, "file with the new method version")
        ->required();
    predict_cmd->add_flag("--fail-on-inconsistent", fail_on_inconsistent,
                          "exit 1 when any comment is flagged (for CI)");

    CLI11_PARSE(app, argc, argv);

    if (mine->parsed()) return cmd_mine(repo_entries, mine_out, mine_seed);
    if (build->parsed()) return cmd_build_dataset(build_in, build_out_dir, build_seed);
    if (train_cmd->parsed()) {
        if (seed_opt->count() > 0) train_seed = train_seed_value;
        return cmd_train(train_config, train_data_dir, train_ckpt, train_embeddings,
                         train_seed);
    }
    if (eval_cmd->parsed())
        return cmd_evaluate(eval_ckpt, eval_baseline, eval_data_dir, eval_split,
                            eval_mode, eval_embeddings, eval_report, eval_seed);
    if (predict_cmd->parsed())
        return cmd_predict(pred_ckpt, pred_old, pred_new, fail_on_inconsistent);
    return kExitOk;
}
