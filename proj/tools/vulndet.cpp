// vulndet - mine vulnerability-labeled function pairs from commits,
// augment them with vulnerability-preserving mutations, train per-class
// graph classifiers and evaluate the voting ensemble.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "vulndet/checkpoint.hpp"
#include "vulndet/dataset.hpp"
#include "vulndet/ensemble.hpp"
#include "vulndet/train.hpp"
#include "vulndet/version.hpp"

namespace fs = std::filesystem;
using vulndet::Json;

namespace {

void write_manifest(const fs::path& dir, const std::string& subcommand,
                    std::uint64_t seed, const Json& config) {
    Json m;
    m["tool"] = "vulndet";
    m["version"] = vulndet::kVersion;
    m["subcommand"] = subcommand;
    m["seed"] = seed;
    m["config"] = config;
    fs::create_directories(dir);
    vulndet::write_file(dir / ("manifest-" + subcommand + ".json"),
                        m.dump(2) + "\n");
}

std::vector<vulndet::CommitRecord> load_commit_dump(const fs::path& path,
                                                    int* malformed_lines) {
    std::vector<vulndet::CommitRecord> commits;
    for (const std::string& line : vulndet::read_lines(path)) {
        try {
            commits.push_back(vulndet::commit_from_json(Json::parse(line)));
        } catch (const std::exception&) {
            if (malformed_lines) ++*malformed_lines;
        }
    }
    return commits;
}

std::map<std::string, vulndet::FunctionRecord> load_function_file(
    const fs::path& path) {
    std::map<std::string, vulndet::FunctionRecord> out;
    if (!fs::exists(path)) return out;
    for (const std::string& line : vulndet::read_lines(path)) {
        vulndet::FunctionRecord r = vulndet::function_from_json(Json::parse(line));
        out[r.id] = std::move(r);
    }
    return out;
}

std::array<int, 3> parse_split(const std::string& s) {
    std::array<int, 3> out{6, 2, 2};
    if (std::sscanf(s.c_str(), "%d:%d:%d", &out[0], &out[1], &out[2]) != 3)
        throw vulndet::Error("bad --split, expected T:V:E like 6:2:2");
    return out;
}

vulndet::Cwe parse_cwe(const std::string& s) {
    auto c = vulndet::cwe_from_name(s);
    if (!c) throw vulndet::Error("unknown CWE label: " + s);
    return *c;
}

Json pair_to_json(const vulndet::PatchTuple& t) {
    Json j;
    j["v_id"] = t.f_v.id;
    j["p_id"] = t.f_p.id;
    j["cwe"] = vulndet::cwe_name(t.f_v.cwe);
    j["s_del"] = t.s_del;
    j["s_add"] = t.s_add;
    return j;
}

struct PairRef {
    std::string v_id, p_id;
    vulndet::Cwe cwe = vulndet::Cwe::Cwe404;
    std::set<int> s_del, s_add;
};

std::vector<PairRef> load_pairs(const fs::path& path) {
    std::vector<PairRef> out;
    for (const std::string& line : vulndet::read_lines(path)) {
        Json j = Json::parse(line);
        PairRef p;
        p.v_id = j.at("v_id").get<std::string>();
        p.p_id = j.at("p_id").get<std::string>();
        p.cwe = parse_cwe(j.at("cwe").get<std::string>());
        p.s_del = j.at("s_del").get<std::set<int>>();
        p.s_add = j.at("s_add").get<std::set<int>>();
        out.push_back(std::move(p));
    }
    return out;
}

Json ast_to_json(const vulndet::Ast& ast, vulndet::NodeId id) {
    const vulndet::AstNode& n = ast.node(id);
    Json j;
    j["id"] = n.id;
    j["kind"] = vulndet::ast_kind_name(n.kind);
    if (n.stmt_id) j["stmt_id"] = *n.stmt_id;
    Json toks = Json::array();
    for (const vulndet::Token& t : n.tokens) toks.push_back(t.text);
    j["tokens"] = std::move(toks);
    Json kids = Json::array();
    for (vulndet::NodeId c : n.children) kids.push_back(ast_to_json(ast, c));
    j["children"] = std::move(kids);
    return j;
}

void emit(const std::optional<std::string>& out_path, const std::string& text) {
    if (out_path)
        vulndet::write_file(*out_path, text);
    else
        std::cout << text;
}

vulndet::Hyper hyper_from_config_file(const fs::path& path, vulndet::Hyper hp,
                                      bool* hops_set) {
    for (const std::string& raw : vulndet::read_lines(path)) {
        std::string line = raw;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            while (!s.empty() && std::isspace((unsigned char)s.front()))
                s.erase(s.begin());
            while (!s.empty() && std::isspace((unsigned char)s.back()))
                s.pop_back();
            return s;
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) continue;
        if (key == "d") hp.d = std::stoi(value);
        else if (key == "d_edge") hp.d_edge = std::stoi(value);
        else if (key == "hops") { hp.hops = std::stoi(value); *hops_set = true; }
        else if (key == "dropout") hp.dropout = std::stod(value);
        else if (key == "lr") hp.lr = std::stod(value);
        else if (key == "batch") hp.batch = std::stoi(value);
        else if (key == "epochs") hp.epochs = std::stoi(value);
        else if (key == "seed") hp.seed = std::stoull(value);
        else if (key == "vocab_cap") hp.vocab_cap = std::stoi(value);
        else if (key == "cwe") parse_cwe(value); // validated, --cwe wins
        else if (key == "variant") {
            auto v = vulndet::variant_from_name(value);
            if (!v) throw vulndet::Error("unknown variant: " + value);
            hp.variant = *v;
        } else {
            throw vulndet::Error("unknown config key: " + key);
        }
    }
    return hp;
}

std::vector<std::vector<std::string>> record_token_docs(
    const std::vector<const vulndet::FunctionRecord*>& records) {
    std::vector<std::vector<std::string>> docs;
    for (const vulndet::FunctionRecord* r : records) {
        vulndet::Cpg g = vulndet::cpg_from_source(r->code, r->id);
        std::vector<std::string> doc;
        for (const vulndet::CpgNode& n : g.nodes)
            for (const std::string& tok : n.code)
                for (const std::string& sub : vulndet::split_subtokens(tok))
                    doc.push_back(sub);
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<vulndet::EncodedGraph> encode_records(
    const std::vector<const vulndet::FunctionRecord*>& records,
    const vulndet::Vocabulary& vocab) {
    std::vector<vulndet::EncodedGraph> out;
    for (const vulndet::FunctionRecord* r : records)
        out.push_back(vulndet::encode_graph(
            vulndet::cpg_from_source(r->code, r->id), vocab, r->label));
    return out;
}

int run_gradcheck(std::uint64_t seed, int samples);

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fine-grained C vulnerability detection toolkit"};
    app.require_subcommand(1);

    auto* cmd_parse = app.add_subcommand("parse", "parse one C function");
    std::string parse_file;
    std::optional<std::string> parse_out;
    cmd_parse->add_option("--function", parse_file, "C source file")->required();
    cmd_parse->add_option("--out", parse_out, "output path (default stdout)");

    auto* cmd_graph = app.add_subcommand("graph", "emit the joint graph record");
    std::string graph_file;
    std::optional<std::string> graph_out;
    std::string graph_cwe = "CWE-404";
    int graph_label = 0;
    cmd_graph->add_option("--function", graph_file, "C source file")->required();
    cmd_graph->add_option("--out", graph_out, "output path (default stdout)");
    cmd_graph->add_option("--cwe", graph_cwe, "class label for the record");
    cmd_graph->add_option("--label", graph_label, "0/1 label for the record");

    auto* cmd_ingest =
        app.add_subcommand("ingest", "commit dump -> labeled split dataset");
    std::string ingest_input, ingest_out;
    std::string ingest_split = "6:2:2";
    std::optional<std::string> ingest_cwe;
    int ingest_max_nodes = 800;
    std::uint64_t ingest_seed = 0;
    cmd_ingest->add_option("--input", ingest_input, "commit dump (jsonl)")
        ->required();
    cmd_ingest->add_option("--out-dir", ingest_out, "output directory")
        ->required();
    cmd_ingest->add_option("--cwe", ingest_cwe, "keep only this class");
    cmd_ingest->add_option("--seed", ingest_seed, "split shuffle seed");
    cmd_ingest->add_option("--max-nodes", ingest_max_nodes,
                           "graph node budget (default 800)");
    cmd_ingest->add_option("--split", ingest_split,
                           "ratios T:V:E (default 6:2:2)");

    auto* cmd_slice =
        app.add_subcommand("slice", "vulnerability-related statement sets");
    std::string slice_data;
    std::optional<std::string> slice_out;
    cmd_slice->add_option("--data", slice_data, "ingest output directory")
        ->required();
    cmd_slice->add_option("--out", slice_out,
                          "output path (default <data>/slices.jsonl)");

    auto* cmd_augment =
        app.add_subcommand("augment", "generate mutated vulnerable variants");
    std::string augment_data;
    std::string augment_ops = "rn,ai,del,add,ro";
    int augment_per_op = 0;
    std::uint64_t augment_seed = 0;
    cmd_augment->add_option("--data", augment_data, "ingest output directory")
        ->required();
    cmd_augment->add_option("--ops", augment_ops, "comma list of operators");
    cmd_augment->add_option("--per-op", augment_per_op,
                            "mutant budget per operator (0 = one per function)");
    cmd_augment->add_option("--seed", augment_seed, "mutation seed");

    auto* cmd_train = app.add_subcommand("train", "train one per-class model");
    std::string train_data, train_out, train_cwe;
    std::optional<std::string> train_config;
    std::optional<int> train_hops, train_d, train_d_edge, train_batch,
        train_epochs;
    std::optional<double> train_dropout, train_lr;
    std::optional<std::uint64_t> train_seed;
    std::string train_variant;
    cmd_train->add_option("--data", train_data, "ingest output directory")
        ->required();
    cmd_train->add_option("--out", train_out, "model output directory")
        ->required();
    cmd_train->add_option("--cwe", train_cwe, "class to train")->required();
    cmd_train->add_option("--config", train_config, "key=value config file");
    cmd_train->add_option("--hops", train_hops, "message passing rounds");
    cmd_train->add_option("--d", train_d, "node embedding width");
    cmd_train->add_option("--d-edge", train_d_edge, "edge embedding width");
    cmd_train->add_option("--dropout", train_dropout, "dropout probability");
    cmd_train->add_option("--lr", train_lr, "learning rate");
    cmd_train->add_option("--batch", train_batch, "batch size");
    cmd_train->add_option("--epochs", train_epochs, "training epochs");
    cmd_train->add_option("--seed", train_seed, "training seed");
    cmd_train->add_option("--variant", train_variant,
                          "edge_aware | ggnn | gcn");

    auto* cmd_predict = app.add_subcommand("predict", "ensemble verdict");
    std::string predict_models, predict_file;
    cmd_predict->add_option("--models", predict_models, "checkpoint directory")
        ->required();
    cmd_predict->add_option("--function", predict_file, "C source file")
        ->required();

    auto* cmd_eval = app.add_subcommand("evaluate", "score on the test split");
    std::string eval_models, eval_data, eval_out;
    std::vector<std::string> eval_cwes;
    cmd_eval->add_option("--models", eval_models, "checkpoint directory")
        ->required();
    cmd_eval->add_option("--data", eval_data, "ingest output directory")
        ->required();
    cmd_eval->add_option("--out", eval_out, "report directory")->required();
    cmd_eval->add_option("--cwe", eval_cwes, "classes to score (default: all)");

    auto* cmd_gradcheck =
        app.add_subcommand("gradcheck", "finite-difference gradient audit");
    std::uint64_t gc_seed = 7;
    int gc_samples = 100;
    cmd_gradcheck->add_option("--seed", gc_seed, "probe seed");
    cmd_gradcheck->add_option("--samples", gc_samples, "coordinates per check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return 2;
    }

    try {
        if (*cmd_parse) {
            vulndet::Ast ast =
                vulndet::parse_source(vulndet::read_file(parse_file));
            emit(parse_out, ast_to_json(ast, ast.root).dump(2) + "\n");
            return 0;
        }

        if (*cmd_graph) {
            vulndet::Cpg g = vulndet::cpg_from_source(
                vulndet::read_file(graph_file), fs::path(graph_file).stem());
            Json j = vulndet::graph_record(g, graph_label, parse_cwe(graph_cwe));
            emit(graph_out, j.dump() + "\n");
            return 0;
        }

        if (*cmd_ingest) {
            int malformed_lines = 0;
            auto commits = load_commit_dump(ingest_input, &malformed_lines);

            vulndet::IngestOptions opt;
            opt.split_ratios = parse_split(ingest_split);
            opt.max_nodes = ingest_max_nodes;
            opt.seed = ingest_seed;
            if (ingest_cwe) opt.only_cwe = parse_cwe(*ingest_cwe);
            vulndet::IngestResult res = vulndet::run_ingest(commits, opt);

            fs::create_directories(ingest_out);
            std::string functions, graphs, pairs;
            for (const vulndet::PatchTuple& t : res.pairs) {
                functions += vulndet::to_json(t.f_v).dump() + "\n";
                functions += vulndet::to_json(t.f_p).dump() + "\n";
                graphs += vulndet::graph_record_for(t.f_v).dump() + "\n";
                graphs += vulndet::graph_record_for(t.f_p).dump() + "\n";
                pairs += pair_to_json(t).dump() + "\n";
            }
            vulndet::write_file(fs::path(ingest_out) / "functions.jsonl",
                                functions);
            vulndet::write_file(fs::path(ingest_out) / "graphs.jsonl", graphs);
            vulndet::write_file(fs::path(ingest_out) / "pairs.jsonl", pairs);
            vulndet::write_file(fs::path(ingest_out) / "split.json",
                                vulndet::to_json(res.split).dump(2) + "\n");

            Json stats;
            stats["commits"] = res.counters.total() + malformed_lines;
            stats["malformed_lines"] = malformed_lines;
            stats["emitted"] = res.counters.emitted;
            stats["excluded"]["no_keyword"] = res.counters.no_keyword;
            stats["excluded"]["ambiguous_type"] = res.counters.ambiguous_type;
            stats["excluded"]["multi_function"] = res.counters.multi_function;
            stats["excluded"]["ambiguous_context"] =
                res.counters.ambiguous_context;
            stats["excluded"]["malformed_diff"] = res.counters.malformed_diff;
            stats["parse_failures"] = res.parse_failures;
            stats["empty_change"] = res.empty_change;
            stats["pairs_kept"] = res.preprocess.kept_pairs;
            stats["pairs_dropped_size"] = res.preprocess.dropped_pairs;
            vulndet::write_file(fs::path(ingest_out) / "stats.json",
                                stats.dump(2) + "\n");

            Json config;
            config["input"] = ingest_input;
            config["out_dir"] = ingest_out;
            config["split"] = ingest_split;
            config["max_nodes"] = ingest_max_nodes;
            if (ingest_cwe) config["cwe"] = *ingest_cwe;
            write_manifest(ingest_out, "ingest", ingest_seed, config);

            std::cout << "ingested " << res.pairs.size() << " pairs from "
                      << (res.counters.total() + malformed_lines)
                      << " commit records\n";
            return 0;
        }

        if (*cmd_slice) {
            fs::path data(slice_data);
            auto functions = load_function_file(data / "functions.jsonl");
            auto pairs = load_pairs(data / "pairs.jsonl");
            std::string out_path =
                slice_out ? *slice_out : (data / "slices.jsonl").string();

            std::string lines;
            for (const PairRef& p : pairs) {
                const vulndet::FunctionRecord& fv = functions.at(p.v_id);
                const vulndet::FunctionRecord& fp = functions.at(p.p_id);
                vulndet::SliceOutcome s = vulndet::slice_patch(
                    vulndet::parse_source(fv.code),
                    vulndet::parse_source(fp.code), p.s_del, p.s_add);
                Json j;
                j["v_id"] = p.v_id;
                j["p_id"] = p.p_id;
                j["related_v"] = s.related.related_v;
                j["related_p"] = s.related.related_p;
                j["frozen_v"] = s.frozen_v;
                Json align = Json::object();
                for (auto [ps, vs] : s.alignment)
                    align[std::to_string(ps)] = vs;
                j["alignment"] = std::move(align);
                lines += j.dump() + "\n";
            }
            vulndet::write_file(out_path, lines);

            Json config;
            config["data"] = slice_data;
            config["out"] = out_path;
            write_manifest(fs::path(out_path).parent_path(), "slice", 0, config);
            std::cout << "sliced " << pairs.size() << " pairs\n";
            return 0;
        }

        if (*cmd_augment) {
            fs::path data(augment_data);
            auto functions = load_function_file(data / "functions.jsonl");
            auto pair_refs = load_pairs(data / "pairs.jsonl");
            vulndet::DatasetSplit split = vulndet::split_from_json(
                Json::parse(vulndet::read_file(data / "split.json")));
            std::set<std::string> train_ids(split.train.begin(),
                                            split.train.end());

            std::set<vulndet::MutationOp> ops;
            {
                std::stringstream ss(augment_ops);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    auto op = vulndet::mutation_op_from_name(item);
                    if (!op) throw vulndet::Error("unknown operator: " + item);
                    ops.insert(*op);
                }
            }

            std::vector<vulndet::PatchTuple> tuples;
            for (const PairRef& p : pair_refs) {
                if (!train_ids.count(p.v_id)) continue; // train split only
                vulndet::PatchTuple t;
                t.f_v = functions.at(p.v_id);
                t.f_p = functions.at(p.p_id);
                t.s_del = p.s_del;
                t.s_add = p.s_add;
                tuples.push_back(std::move(t));
            }

            vulndet::AugmentStats stats;
            std::vector<vulndet::MutatedFunction> mutants =
                vulndet::augment_dataset(tuples, ops, augment_per_op,
                                         augment_seed, &stats);

            std::string lines, graph_lines;
            int oversized = 0;
            std::vector<std::string> mutant_ids;
            for (const vulndet::MutatedFunction& m : mutants) {
                vulndet::FunctionRecord r = vulndet::to_function_record(m);
                vulndet::Cpg g = vulndet::cpg_from_source(r.code, r.id);
                if (int(g.nodes.size()) > vulndet::kMaxGraphNodes) {
                    ++oversized;
                    continue;
                }
                lines += vulndet::to_json(r).dump() + "\n";
                graph_lines +=
                    vulndet::graph_record(g, r.label, r.cwe).dump() + "\n";
                mutant_ids.push_back(r.id);
            }
            vulndet::write_file(data / "mutants.jsonl", lines);
            vulndet::write_file(data / "mutant_graphs.jsonl", graph_lines);

            // mutants ride with the train split only
            split.train.insert(split.train.end(), mutant_ids.begin(),
                               mutant_ids.end());
            vulndet::write_file(data / "split.json",
                                vulndet::to_json(split).dump(2) + "\n");

            Json jstats;
            jstats["attempted"] = stats.attempted;
            jstats["produced"] = int(mutant_ids.size());
            jstats["no_candidates"] = stats.no_candidates;
            jstats["failed"] = stats.failed;
            jstats["oversized"] = oversized;
            vulndet::write_file(data / "stats-augment.json",
                                jstats.dump(2) + "\n");

            Json config;
            config["data"] = augment_data;
            config["ops"] = augment_ops;
            config["per_op"] = augment_per_op;
            write_manifest(data, "augment", augment_seed, config);
            std::cout << "generated " << mutant_ids.size() << " mutants ("
                      << stats.no_candidates << " skips)\n";
            return 0;
        }

        if (*cmd_train) {
            fs::path data(train_data);
            vulndet::Cwe cwe = parse_cwe(train_cwe);

            vulndet::Hyper hp;
            bool hops_set = false;
            if (train_config)
                hp = hyper_from_config_file(*train_config, hp, &hops_set);
            if (train_hops) {
                hp.hops = *train_hops;
                hops_set = true;
            }
            if (!hops_set) hp.hops = vulndet::default_hops(cwe);
            if (train_d) hp.d = *train_d;
            if (train_d_edge) hp.d_edge = *train_d_edge;
            if (train_dropout) hp.dropout = *train_dropout;
            if (train_lr) hp.lr = *train_lr;
            if (train_batch) hp.batch = *train_batch;
            if (train_epochs) hp.epochs = *train_epochs;
            if (train_seed) hp.seed = *train_seed;
            if (!train_variant.empty()) {
                auto variant = vulndet::variant_from_name(train_variant);
                if (!variant)
                    throw vulndet::Error("unknown variant: " + train_variant);
                hp.variant = *variant;
            }

            auto functions = load_function_file(data / "functions.jsonl");
            auto mutants = load_function_file(data / "mutants.jsonl");
            vulndet::DatasetSplit split = vulndet::split_from_json(
                Json::parse(vulndet::read_file(data / "split.json")));

            auto collect = [&](const std::vector<std::string>& ids) {
                std::vector<const vulndet::FunctionRecord*> out;
                for (const std::string& id : ids) {
                    const vulndet::FunctionRecord* r = nullptr;
                    auto f = functions.find(id);
                    if (f != functions.end()) r = &f->second;
                    auto mu = mutants.find(id);
                    if (mu != mutants.end()) r = &mu->second;
                    if (r && r->cwe == cwe) out.push_back(r);
                }
                return out;
            };
            auto train_records = collect(split.train);
            auto val_records = collect(split.validation);
            if (train_records.empty())
                throw vulndet::TooFewPairs("no train records for " + train_cwe);

            vulndet::Vocabulary vocab = vulndet::Vocabulary::build(
                record_token_docs(train_records), 3, hp.vocab_cap);
            vulndet::ModelState init = vulndet::init_model(hp, vocab, cwe);
            vulndet::TrainResult result = vulndet::train_model(
                encode_records(train_records, vocab),
                encode_records(val_records, vocab), std::move(init), hp.seed);

            fs::create_directories(train_out);
            vulndet::save_checkpoint(fs::path(train_out) / (train_cwe + ".ckpt"),
                                     result.model);

            Json history = Json::array();
            for (const vulndet::EpochStats& s : result.history) {
                Json e;
                e["epoch"] = s.epoch;
                e["train_loss"] = s.train_loss;
                e["val_precision"] = s.val_precision;
                e["val_recall"] = s.val_recall;
                e["val_f1"] = s.val_f1;
                history.push_back(std::move(e));
            }
            Json jh;
            jh["cwe"] = train_cwe;
            jh["best_epoch"] = result.best_epoch;
            jh["epochs"] = std::move(history);
            vulndet::write_file(
                fs::path(train_out) / (train_cwe + ".history.json"),
                jh.dump(2) + "\n");

            Json config;
            config["data"] = train_data;
            config["cwe"] = train_cwe;
            config["d"] = hp.d;
            config["d_edge"] = hp.d_edge;
            config["hops"] = hp.hops;
            config["dropout"] = hp.dropout;
            config["lr"] = hp.lr;
            config["batch"] = hp.batch;
            config["epochs"] = hp.epochs;
            config["variant"] = vulndet::variant_name(hp.variant);
            write_manifest(train_out, "train-" + train_cwe, hp.seed, config);

            std::cout << "trained " << train_cwe << ": best epoch "
                      << result.best_epoch << "\n";
            return 0;
        }

        if (*cmd_predict) {
            vulndet::ModelSet models;
            for (vulndet::Cwe c : vulndet::all_cwes()) {
                fs::path ckpt = fs::path(predict_models) /
                                (std::string(vulndet::cwe_name(c)) + ".ckpt");
                models.emplace(c, vulndet::load_checkpoint(ckpt));
            }
            vulndet::Verdict v = vulndet::predict_function(
                vulndet::read_file(predict_file), models);

            Json j;
            j["function"] = predict_file;
            Json logits = Json::object();
            for (int i = 0; i < vulndet::kCweCount; ++i)
                logits[vulndet::cwe_name(vulndet::all_cwes()[std::size_t(i)])] =
                    v.logits[std::size_t(i)];
            j["logits"] = std::move(logits);
            j["bits"] = v.bits;
            j["vulnerable"] = v.final_label;
            if (v.attributed)
                j["attributed_cwe"] = vulndet::cwe_name(*v.attributed);
            std::cout << j.dump() << "\n";
            return 0;
        }

        if (*cmd_eval) {
            fs::path data(eval_data);
            auto functions = load_function_file(data / "functions.jsonl");
            vulndet::DatasetSplit split = vulndet::split_from_json(
                Json::parse(vulndet::read_file(data / "split.json")));
            if (split.test.empty())
                throw vulndet::Error("empty test split, nothing to evaluate");

            std::vector<vulndet::Cwe> wanted;
            if (eval_cwes.empty()) {
                for (vulndet::Cwe c : vulndet::all_cwes()) {
                    fs::path ckpt = fs::path(eval_models) /
                                    (std::string(vulndet::cwe_name(c)) + ".ckpt");
                    if (fs::exists(ckpt)) wanted.push_back(c);
                }
            } else {
                for (const std::string& s : eval_cwes)
                    wanted.push_back(parse_cwe(s));
            }
            if (wanted.empty())
                throw vulndet::MissingCheckpoint("no checkpoints in " +
                                                 eval_models);

            std::map<vulndet::Cwe, std::vector<vulndet::FunctionRecord>>
                test_by_cwe;
            for (const std::string& id : split.test) {
                auto it = functions.find(id);
                if (it != functions.end())
                    test_by_cwe[it->second.cwe].push_back(it->second);
            }

            vulndet::ModelSet models;
            for (vulndet::Cwe c : wanted) {
                fs::path ckpt = fs::path(eval_models) /
                                (std::string(vulndet::cwe_name(c)) + ".ckpt");
                models.emplace(c, vulndet::load_checkpoint(ckpt));
            }

            Json rows = Json::array();
            std::string text;
            char line[160];
            std::snprintf(line, sizeof line, "%-10s %7s %7s %7s %6s\n", "class",
                          "P", "R", "F1", "n");
            text += line;
            auto add_row = [&](const std::string& name,
                               const vulndet::Metrics& m, int n) {
                Json r;
                r["name"] = name;
                r["precision"] = m.precision;
                r["recall"] = m.recall;
                r["f1"] = m.f1;
                r["count"] = n;
                rows.push_back(std::move(r));
                std::snprintf(line, sizeof line,
                              "%-10s %7.3f %7.3f %7.3f %6d\n", name.c_str(),
                              m.precision, m.recall, m.f1, n);
                text += line;
            };

            for (vulndet::Cwe c : wanted) {
                const auto& records = test_by_cwe[c];
                vulndet::Metrics m =
                    vulndet::evaluate_classifier(models.at(c), records);
                add_row(vulndet::cwe_name(c), m, int(records.size()));
            }

            bool full_set = true;
            for (vulndet::Cwe c : vulndet::all_cwes())
                full_set = full_set && models.count(c) > 0;
            if (full_set) {
                std::vector<int> preds, labels;
                for (const auto& [c, records] : test_by_cwe)
                    for (const vulndet::FunctionRecord& r : records) {
                        vulndet::Verdict v =
                            vulndet::predict_function(r.code, models);
                        preds.push_back(v.final_label);
                        labels.push_back(r.label);
                    }
                vulndet::Metrics m = vulndet::compute_metrics(preds, labels);
                add_row("ensemble", m, int(preds.size()));
            }

            fs::create_directories(eval_out);
            Json report;
            report["rows"] = std::move(rows);
            vulndet::write_file(fs::path(eval_out) / "report.json",
                                report.dump(2) + "\n");
            vulndet::write_file(fs::path(eval_out) / "report.txt", text);

            Json config;
            config["models"] = eval_models;
            config["data"] = eval_data;
            write_manifest(eval_out, "evaluate", 0, config);
            std::cout << text;
            return 0;
        }

        if (*cmd_gradcheck) return run_gradcheck(gc_seed, gc_samples);
    } catch (const vulndet::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

namespace {

int run_gradcheck(std::uint64_t seed, int samples) {
    vulndet::Rng rng(seed);

    vulndet::EncodedGraph g;
    g.id = "probe";
    g.label = 1;
    g.node_tokens = {{0}, {1}, {0, 1}, {1}, {}, {0}};
    int spec[][3] = {{0, 1, 1}, {1, 2, 2}, {2, 3, 4},
                     {3, 4, 3}, {4, 5, 1}, {0, 5, 2}};
    for (auto& e : spec) {
        g.edges.push_back({e[0], e[1], e[2]});
        g.edges.push_back({e[1], e[0], e[2] + 5});
    }

    double worst = 0.0;
    for (vulndet::GnnVariant variant :
         {vulndet::GnnVariant::EdgeAware, vulndet::GnnVariant::Ggnn,
          vulndet::GnnVariant::Gcn}) {
        vulndet::Hyper hp;
        hp.d = 5;
        hp.d_edge = 5;
        hp.hops = 2;
        hp.dropout = 0.3;
        hp.seed = seed;
        hp.variant = variant;
        vulndet::ModelState base = vulndet::init_model(hp, vulndet::Vocabulary());

        auto run = [&](const std::map<std::string, vulndet::Tensor>& p,
                       std::map<std::string, vulndet::Tensor>* grads) {
            vulndet::ModelState m = base;
            m.params = p;
            vulndet::Tape tape;
            vulndet::BoundModel bound = vulndet::bind_model(tape, m);
            vulndet::Rng mask(11); // pinned dropout stream
            vulndet::Tape::Id y = vulndet::predict_logit(bound, g, true, mask);
            vulndet::Tape::Id loss = vulndet::bce_node(tape, y, g.label);
            if (grads) {
                auto raw = tape.backward(loss);
                for (const auto& [name, id] : bound.ids)
                    (*grads)[name] = raw.at(id);
            }
            return tape.value(loss).data[0];
        };
        double err = vulndet::grad_check(
            [&](const auto& p) { return run(p, nullptr); },
            [&](const auto& p) {
                std::map<std::string, vulndet::Tensor> out;
                run(p, &out);
                return out;
            },
            base.params, samples, rng);
        worst = std::max(worst, err);
        std::cout << "model " << vulndet::variant_name(variant)
                  << ": max relative error " << err << "\n";
    }

    bool ok = worst <= 1e-4;
    std::cout << (ok ? "gradcheck passed" : "gradcheck FAILED") << "\n";
    return ok ? 0 : 1;
}

} // namespace
