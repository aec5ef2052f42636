// eiu: operator surface for synthetic-corpus experiments with the
// emotion-intent joint recognition network and the corpus utilities.
//
// Subcommands: synth, pretrain, train, eval, ablate, gradcheck, vote, kappa,
// split, corr, stats, parse-subs. Exit codes: 0 success, 1 data/contract
// errors, 2 usage errors.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "eiu/annotate.hpp"
#include "eiu/corpus.hpp"
#include "eiu/gradaudit.hpp"
#include "eiu/split.hpp"
#include "eiu/stats.hpp"
#include "eiu/subtitle.hpp"
#include "eiu/synth.hpp"
#include "eiu/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw eiu::DataError("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw eiu::DataError("cannot open " + path + " for writing");
    out << text;
}

// key = value lines; '#' starts a comment
std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::map<std::string, std::string> entries;
    std::istringstream in(read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!key.empty()) entries[key] = value;
    }
    return entries;
}

// precedence: defaults < config file < explicit flags
void apply_config_file(CLI::App* sub, const std::map<std::string, std::string>& entries) {
    for (const auto& [key, value] : entries) {
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (!opt || opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

eiu::ModalityMask parse_modalities(const std::string& tag) {
    eiu::ModalityMask mask{false, false, false};
    for (char c : tag) {
        if (c == 't') mask.textual = true;
        else if (c == 'a') mask.acoustic = true;
        else if (c == 'v') mask.visual = true;
        else throw eiu::ContractError("modalities must be a subset of \"tav\", got '" +
                                      std::string(1, c) + "'");
    }
    if (!mask.any()) throw eiu::ContractError("modalities must be non-empty");
    return mask;
}

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
}

// every subcommand that writes outputs records its resolved configuration
// before doing any work
void write_manifest(const std::string& out_dir, const std::string& subcommand,
                    std::uint64_t seed, std::size_t n_runs, const json& inputs,
                    const json& config) {
    fs::create_directories(out_dir);
    json m;
    m["subcommand"] = subcommand;
    m["version"] = kVersion;
    m["started"] = iso_now();
    m["seed"] = seed;
    json children = json::array();
    for (std::size_t k = 0; k < n_runs; ++k) children.push_back(seed + k);
    m["child_seeds"] = children;
    m["inputs"] = inputs;
    m["out"] = out_dir;
    m["config"] = config;
    write_text_file((fs::path(out_dir) / "manifest.json").string(), m.dump(2) + "\n");
}

struct LoadedCorpus {
    eiu::Corpus corpus;
    std::vector<eiu::AnnotationRecord> records;
};

// Loads annotations + features and derives a seeded 7:1:2 dialogue split.
// Corpora under 10 dialogues go entirely into the train split.
LoadedCorpus load_corpus(const std::string& dir, const eiu::ModalityMask& mask,
                         std::uint64_t seed) {
    LoadedCorpus out;
    out.records = eiu::parse_annotations_csv(read_text_file(
        (fs::path(dir) / "annotations.csv").string()));
    std::vector<eiu::Conversation> convs = eiu::assemble_conversations(out.records, dir, mask);
    if (convs.size() >= 10) {
        eiu::SplitIndices idx = eiu::split_corpus(convs, eiu::SplitRatios{}, seed);
        for (auto i : idx.train) out.corpus.train.push_back(convs[i]);
        for (auto i : idx.valid) out.corpus.valid.push_back(convs[i]);
        for (auto i : idx.test) out.corpus.test.push_back(convs[i]);
    } else {
        out.corpus.train = std::move(convs);
    }
    return out;
}

// model dims follow the actual feature files
void infer_feature_dims(const eiu::Corpus& corpus, eiu::ModelConfig& cfg) {
    for (const auto& split : {&corpus.train, &corpus.valid, &corpus.test}) {
        for (const auto& conv : *split) {
            for (const auto& utt : conv.utterances) {
                if (utt.features.textual) cfg.text_dim = utt.features.textual->shape()[1];
                if (utt.features.acoustic) cfg.audio_dim = utt.features.acoustic->shape()[1];
                if (utt.features.visual) cfg.visual_dim = utt.features.visual->shape()[1];
                return;
            }
        }
    }
}

struct Options {
    std::string corpus, out, config_file, csv, input, checkpoint, pretrained;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::string modalities = "tav";
    std::string task = "joint";
    std::vector<std::string> ablate_flags;
    std::string precision = "f64";
    bool dry_run = false;

    // model
    std::size_t hidden = 128, heads = 4, filters = 64;
    std::size_t n_emotions = 7, n_intents = 9;

    // training
    double lr = 0.0002;
    std::size_t batch_size = 32, epochs_pretrain = 60, epochs_train = 60, n_runs = 3;
    double gamma = 2.0;

    // synth
    std::size_t conversations = 64, utterances_min = 8, utterances_max = 8;
    double noise = 0.1, stickiness = 0.0;
    double emotion_scale = 1.0, intent_scale = 1.0, peak = 0.85;
    std::size_t text_dim = 12, audio_dim = 10, visual_dim = 8;

    // misc
    std::string split_name = "test";
    std::vector<std::string> rows;
    std::size_t points = 5;
};

eiu::ModelConfig model_config(const Options& o) {
    eiu::ModelConfig cfg;
    cfg.hidden = o.hidden;
    cfg.heads = o.heads;
    cfg.filters_per_width = o.filters;
    cfg.n_emotions = o.n_emotions;
    cfg.n_intents = o.n_intents;
    cfg.modality_mask = parse_modalities(o.modalities);
    for (const auto& a : o.ablate_flags) {
        if (a == "history") cfg.use_history = false;
        else if (a == "interaction") cfg.use_interaction = false;
        else if (a == "gating") cfg.use_gate = false;
        else if (a != "fl" && a != "pretrain") {
            throw eiu::ContractError("unknown --ablate value: " + a);
        }
    }
    return cfg;
}

eiu::TrainConfig train_config(const Options& o) {
    eiu::TrainConfig tc;
    tc.learning_rate = o.lr;
    tc.batch_size = o.batch_size;
    tc.epochs_pretrain = o.epochs_pretrain;
    tc.epochs_train = o.epochs_train;
    tc.focal_gamma = o.gamma;
    tc.seed = o.seed;
    tc.n_runs = o.n_runs;
    if (o.task == "emotion") tc.task_mode = eiu::TaskMode::emotion_only;
    else if (o.task == "intent") tc.task_mode = eiu::TaskMode::intent_only;
    else if (o.task == "joint") tc.task_mode = eiu::TaskMode::joint;
    else throw eiu::ContractError("--task must be joint, emotion or intent");
    for (const auto& a : o.ablate_flags) {
        if (a == "fl") tc.use_focal = false;
        if (a == "pretrain") tc.pretrained_init = false;
    }
    return tc;
}

eiu::Dtype checkpoint_dtype(const Options& o) {
    if (o.precision == "f64") return eiu::Dtype::f64;
    if (o.precision == "f32") return eiu::Dtype::f32;
    throw eiu::ContractError("--precision must be f32 or f64");
}

json options_json(const Options& o) {
    json j;
    j["modalities"] = o.modalities;
    j["task"] = o.task;
    j["ablate"] = o.ablate_flags;
    j["precision"] = o.precision;
    j["hidden"] = o.hidden;
    j["heads"] = o.heads;
    j["filters"] = o.filters;
    j["lr"] = o.lr;
    j["batch_size"] = o.batch_size;
    j["epochs_pretrain"] = o.epochs_pretrain;
    j["epochs_train"] = o.epochs_train;
    j["gamma"] = o.gamma;
    j["n_runs"] = o.n_runs;
    return j;
}

json synth_json(const Options& o) {
    json j;
    j["conversations"] = o.conversations;
    j["utterances_min"] = o.utterances_min;
    j["utterances_max"] = o.utterances_max;
    j["noise"] = o.noise;
    j["stickiness"] = o.stickiness;
    j["emotion_scale"] = o.emotion_scale;
    j["intent_scale"] = o.intent_scale;
    j["peak"] = o.peak;
    j["text_dim"] = o.text_dim;
    j["audio_dim"] = o.audio_dim;
    j["visual_dim"] = o.visual_dim;
    return j;
}

eiu::SynthConfig synth_config(const Options& o) {
    eiu::SynthConfig cfg = eiu::SynthConfig::defaults();
    cfg.n_conversations = o.conversations;
    cfg.min_utterances = o.utterances_min;
    cfg.max_utterances = o.utterances_max;
    cfg.noise = o.noise;
    cfg.stickiness = o.stickiness;
    cfg.emotion_proto_scale = o.emotion_scale;
    cfg.intent_proto_scale = o.intent_scale;
    cfg.text_dim = o.text_dim;
    cfg.audio_dim = o.audio_dim;
    cfg.visual_dim = o.visual_dim;
    cfg.seed = o.seed;
    const std::size_t I = eiu::intent_labels().size();
    for (std::size_t e = 0; e < cfg.intent_given_emotion.size(); ++e) {
        const std::size_t favored = e % I;
        for (std::size_t i = 0; i < I; ++i) {
            cfg.intent_given_emotion[e][i] =
                i == favored ? o.peak : (1.0 - o.peak) / static_cast<double>(I - 1);
        }
    }
    return cfg;
}

const std::vector<std::string>& vocab_for(const std::string& task) {
    if (task == "intent") return eiu::intent_labels();
    return eiu::emotion_labels();
}

// ---------------------------------------------------------------------------
// subcommand bodies

int run_synth(const Options& o) {
    eiu::SynthConfig cfg = synth_config(o);
    cfg.validate();
    write_manifest(o.out, "synth", o.seed, 1, json{{"corpus", nullptr}}, synth_json(o));
    if (o.dry_run) return 0;
    eiu::SynthCorpus corpus = eiu::synth_corpus(cfg);
    eiu::write_synth_corpus(corpus, o.out);
    std::cout << "wrote " << corpus.records.size() << " utterances in "
              << corpus.conversations.size() << " conversations to " << o.out << "\n";
    return 0;
}

int run_pretrain(const Options& o) {
    write_manifest(o.out, "pretrain", o.seed, 1, json{{"corpus", o.corpus}}, options_json(o));
    LoadedCorpus lc = load_corpus(o.corpus, parse_modalities(o.modalities), o.seed);
    eiu::ModelConfig cfg = model_config(o);
    infer_feature_dims(lc.corpus, cfg);
    if (o.dry_run) return 0;

    eiu::TrainConfig tc = train_config(o);
    eiu::PretrainResult pr = eiu::pretrain(lc.corpus, cfg, tc);
    eiu::save_checkpoint((fs::path(o.out) / "encoders.eiup").string(), pr.state.params,
                         checkpoint_dtype(o));
    write_text_file((fs::path(o.out) / "encoders.json").string(), cfg.to_json());
    write_text_file((fs::path(o.out) / "pretrain_losses.csv").string(),
                    eiu::loss_curve_csv(pr.losses));
    std::cout << "pretrain loss " << pr.losses.epoch_total.front() << " -> "
              << pr.losses.epoch_total.back() << " over " << tc.epochs_pretrain << " epochs\n";
    return 0;
}

int run_train(const Options& o) {
    write_manifest(o.out, "train", o.seed, 1,
                   json{{"corpus", o.corpus}, {"pretrained", o.pretrained}}, options_json(o));
    LoadedCorpus lc = load_corpus(o.corpus, parse_modalities(o.modalities), o.seed);
    eiu::ModelConfig cfg = model_config(o);
    infer_feature_dims(lc.corpus, cfg);
    if (o.dry_run) return 0;

    eiu::TrainConfig tc = train_config(o);
    const eiu::ModelState* init_from = nullptr;
    eiu::ModelState loaded_pretrained;
    eiu::PretrainResult pre;
    if (!o.pretrained.empty()) {
        loaded_pretrained = eiu::init_model(cfg, tc.seed);
        loaded_pretrained.load_values(eiu::load_checkpoint(o.pretrained));
        init_from = &loaded_pretrained;
    } else if (tc.pretrained_init && tc.epochs_pretrain > 0) {
        pre = eiu::pretrain(lc.corpus, cfg, tc);
        init_from = &pre.state;
    }

    eiu::TrainResult tr = eiu::train(lc.corpus, cfg, tc, init_from);
    eiu::save_checkpoint((fs::path(o.out) / "model.eiup").string(), tr.state.params,
                         checkpoint_dtype(o));
    write_text_file((fs::path(o.out) / "model.json").string(), cfg.to_json());
    write_text_file((fs::path(o.out) / "train_losses.csv").string(),
                    eiu::loss_curve_csv(tr.losses));

    const std::vector<eiu::Conversation>& eval_split =
        lc.corpus.test.empty() ? lc.corpus.train : lc.corpus.test;
    auto [me, mi] = eiu::evaluate(tr.state, cfg, eval_split);
    std::ostringstream summary;
    summary << "split,task,waf\n";
    summary << (lc.corpus.test.empty() ? "train" : "test") << ",emotion," << me.waf << "\n";
    summary << (lc.corpus.test.empty() ? "train" : "test") << ",intent," << mi.waf << "\n";
    write_text_file((fs::path(o.out) / "metrics.csv").string(), summary.str());
    std::cout << "best epoch " << tr.best_epoch << "; emotion WAF " << me.waf << ", intent WAF "
              << mi.waf << "\n";
    return 0;
}

int run_eval(const Options& o) {
    write_manifest(o.out, "eval", o.seed, 1,
                   json{{"corpus", o.corpus}, {"checkpoint", o.checkpoint}}, options_json(o));
    const std::string cfg_path =
        (fs::path(o.checkpoint).parent_path() / "model.json").string();
    eiu::ModelConfig cfg = eiu::ModelConfig::from_json(read_text_file(cfg_path));
    LoadedCorpus lc = load_corpus(o.corpus, cfg.modality_mask, o.seed);
    if (o.dry_run) return 0;

    eiu::ModelState state = eiu::init_model(cfg, o.seed);
    state.load_values(eiu::load_checkpoint(o.checkpoint));

    std::vector<eiu::Conversation> split;
    if (o.split_name == "train") split = lc.corpus.train;
    else if (o.split_name == "valid") split = lc.corpus.valid;
    else if (o.split_name == "test") split = lc.corpus.test;
    else if (o.split_name == "all") {
        split = lc.corpus.train;
        split.insert(split.end(), lc.corpus.valid.begin(), lc.corpus.valid.end());
        split.insert(split.end(), lc.corpus.test.begin(), lc.corpus.test.end());
    } else {
        throw eiu::ContractError("--split must be train, valid, test or all");
    }
    if (split.empty()) split = lc.corpus.train;

    auto [me, mi] = eiu::evaluate(state, cfg, split);
    std::ostringstream os;
    os << "task,waf,samples\n";
    os << "emotion," << me.waf << "," << me.samples << "\n";
    os << "intent," << mi.waf << "," << mi.samples << "\n";
    write_text_file((fs::path(o.out) / "metrics.csv").string(), os.str());
    std::cout << os.str();
    return 0;
}

int run_ablate(const Options& o) {
    write_manifest(o.out, "ablate", o.seed, o.n_runs, json{{"corpus", o.corpus}},
                   options_json(o));
    LoadedCorpus lc = load_corpus(o.corpus, parse_modalities(o.modalities), o.seed);
    eiu::ModelConfig cfg = model_config(o);
    infer_feature_dims(lc.corpus, cfg);
    if (o.dry_run) return 0;

    eiu::TrainConfig tc = train_config(o);
    eiu::AblateOptions opts;
    opts.jobs = o.jobs;
    opts.only = o.rows;
    eiu::AblationReport rep = eiu::ablation_suite(lc.corpus, cfg, tc, opts);
    write_text_file((fs::path(o.out) / "ablation.csv").string(), rep.to_csv());
    write_text_file((fs::path(o.out) / "ablation.txt").string(), rep.to_text());
    std::cout << rep.to_text();
    return 0;
}

int run_gradcheck(const Options& o) {
    if (!o.out.empty()) {
        write_manifest(o.out, "gradcheck", o.seed, 1, json::object(), options_json(o));
        if (o.dry_run) return 0;
    }
    eiu::AuditReport rep = eiu::gradient_audit(o.seed, o.points);
    std::ostringstream os;
    os << "check,max_rel_err\n";
    for (const auto& e : rep.entries) os << e.name << "," << e.max_rel_err << "\n";
    if (!o.out.empty()) {
        write_text_file((fs::path(o.out) / "gradcheck.csv").string(), os.str());
    }
    std::cout << "gradient audit over " << rep.entries.size() << " checks, " << o.points
              << " points: worst " << rep.worst << " (" << rep.worst_name << ")\n";
    const bool ok = rep.worst < 1e-4;
    std::cout << (ok ? "PASS" : "FAIL") << " (threshold 1e-4)\n";
    return ok ? 0 : 1;
}

int run_vote(const Options& o) {
    auto triples = eiu::parse_triples_csv(read_text_file(o.csv));
    const auto& vocab = vocab_for(o.task);
    std::ostringstream os;
    os << "Dia_No,Utt_No,Final,NoMajority\n";
    std::size_t escalated = 0, unresolved = 0;
    for (const auto& t : triples) {
        auto r = eiu::majority_vote(t, vocab);
        escalated += r.no_majority && r.label.has_value();
        unresolved += !r.label.has_value();
        os << t.dia_no << "," << t.utt_no << "," << (r.label ? *r.label : "") << ","
           << (r.no_majority ? 1 : 0) << "\n";
    }
    if (!o.out.empty()) {
        write_manifest(o.out, "vote", o.seed, 1, json{{"csv", o.csv}}, json{{"task", o.task}});
        if (o.dry_run) return 0;
        write_text_file((fs::path(o.out) / "final_labels.csv").string(), os.str());
    } else {
        std::cout << os.str();
    }
    std::cout << triples.size() << " items, " << escalated << " expert-resolved, " << unresolved
              << " unresolved\n";
    return 0;
}

int run_kappa(const Options& o) {
    auto triples = eiu::parse_triples_csv(read_text_file(o.csv));
    const auto& vocab = vocab_for(o.task);
    eiu::KappaResult r = eiu::fleiss_kappa(eiu::triples_to_counts(triples, vocab));
    if (!o.out.empty()) {
        write_manifest(o.out, "kappa", o.seed, 1, json{{"csv", o.csv}}, json{{"task", o.task}});
        if (o.dry_run) return 0;
        write_text_file((fs::path(o.out) / "kappa.csv").string(), eiu::kappa_report_csv(r));
    }
    std::cout << eiu::kappa_report_text(r);
    return 0;
}

int run_split(const Options& o) {
    write_manifest(o.out, "split", o.seed, 1, json{{"corpus", o.corpus}}, json::object());
    auto records = eiu::parse_annotations_csv(
        read_text_file((fs::path(o.corpus) / "annotations.csv").string()));
    // feature files are not needed to partition dialogues
    std::map<std::int64_t, eiu::Conversation> by_dia;
    for (const auto& r : records) {
        by_dia[r.dia_no].dia_no = r.dia_no;
        eiu::Utterance u;
        u.record = r;
        by_dia[r.dia_no].utterances.push_back(std::move(u));
    }
    std::vector<eiu::Conversation> convs;
    for (auto& [d, c] : by_dia) convs.push_back(std::move(c));
    if (o.dry_run) return 0;

    eiu::SplitIndices idx = eiu::split_corpus(convs, eiu::SplitRatios{}, o.seed);
    auto emit = [&](const char* name, const std::vector<std::size_t>& part) {
        std::vector<eiu::AnnotationRecord> subset;
        for (auto i : part) {
            for (const auto& u : convs[i].utterances) subset.push_back(u.record);
        }
        write_text_file((fs::path(o.out) / (std::string("split_") + name + ".csv")).string(),
                        eiu::serialize_annotations_csv(subset));
    };
    emit("train", idx.train);
    emit("valid", idx.valid);
    emit("test", idx.test);
    std::cout << "dialogues: train " << idx.train.size() << ", valid " << idx.valid.size()
              << ", test " << idx.test.size() << "; balance score "
              << eiu::split_balance_score(convs, idx) << "\n";
    return 0;
}

int run_corr(const Options& o) {
    auto records = eiu::parse_annotations_csv(
        read_text_file((fs::path(o.corpus) / "annotations.csv").string()));
    auto m = eiu::correlation_matrix(records);
    if (!o.out.empty()) {
        write_manifest(o.out, "corr", o.seed, 1, json{{"corpus", o.corpus}}, json::object());
        if (o.dry_run) return 0;
        write_text_file((fs::path(o.out) / "correlation.csv").string(),
                        eiu::correlation_csv(m));
        write_text_file((fs::path(o.out) / "correlation.txt").string(),
                        eiu::correlation_heatmap(m));
    }
    std::cout << eiu::correlation_heatmap(m);
    return 0;
}

int run_stats(const Options& o) {
    auto records = eiu::parse_annotations_csv(
        read_text_file((fs::path(o.corpus) / "annotations.csv").string()));
    std::map<std::int64_t, eiu::Conversation> by_dia;
    for (const auto& r : records) {
        by_dia[r.dia_no].dia_no = r.dia_no;
        eiu::Utterance u;
        u.record = r;
        by_dia[r.dia_no].utterances.push_back(std::move(u));
    }
    std::vector<eiu::Conversation> convs;
    for (auto& [d, c] : by_dia) convs.push_back(std::move(c));
    eiu::DatasetStats s = eiu::dataset_stats(convs);
    if (!o.out.empty()) {
        write_manifest(o.out, "stats", o.seed, 1, json{{"corpus", o.corpus}}, json::object());
        if (o.dry_run) return 0;
        write_text_file((fs::path(o.out) / "stats.csv").string(), eiu::stats_csv(s));
        write_text_file((fs::path(o.out) / "stats.txt").string(), eiu::stats_text(s));
    }
    std::cout << eiu::stats_text(s);
    return 0;
}

int run_parse_subs(const Options& o) {
    auto entries = eiu::parse_subtitle_file(read_text_file(o.input));
    std::ostringstream os;
    os << "index,begin_ms,end_ms,text\n";
    for (const auto& e : entries) {
        std::string text = e.text;
        const bool quote = text.find_first_of(",\"\n") != std::string::npos;
        if (quote) {
            std::string q = "\"";
            for (char c : text) q += c == '"' ? std::string("\"\"") : std::string(1, c);
            text = q + "\"";
        }
        os << e.index << "," << e.begin_ms << "," << e.end_ms << "," << text << "\n";
    }
    if (!o.out.empty()) {
        write_manifest(o.out, "parse-subs", o.seed, 1, json{{"in", o.input}}, json::object());
        if (o.dry_run) return 0;
        write_text_file((fs::path(o.out) / "subtitles.csv").string(), os.str());
    }
    std::cout << os.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"emotion-intent joint understanding: reference pipeline and corpus tools"};
    app.require_subcommand(1);

    Options o;
    std::map<CLI::App*, bool> needs_out;

    auto add_common = [&](CLI::App* sub, bool with_out) {
        sub->add_option("--seed", o.seed, "root random seed");
        sub->add_option("--config", o.config_file, "key = value configuration file");
        sub->add_flag("--dry-run", o.dry_run, "validate inputs, write only the manifest");
        if (with_out) sub->add_option("--out", o.out, "output directory")->required();
        else sub->add_option("--out", o.out, "output directory");
        needs_out[sub] = with_out;
    };
    auto add_model_opts = [&](CLI::App* sub) {
        sub->add_option("--modalities", o.modalities, "modality subset, e.g. tav, ta, t");
        sub->add_option("--task", o.task, "joint | emotion | intent");
        sub->add_option("--ablate", o.ablate_flags,
                        "history | interaction | gating | fl | pretrain");
        sub->add_option("--precision", o.precision, "f32 | f64 checkpoint storage");
        sub->add_option("--hidden", o.hidden, "hidden size");
        sub->add_option("--heads", o.heads, "attention heads");
        sub->add_option("--filters", o.filters, "textcnn filters per kernel width");
        sub->add_option("--lr", o.lr, "learning rate");
        sub->add_option("--batch-size", o.batch_size, "batch size");
        sub->add_option("--epochs-pretrain", o.epochs_pretrain, "pre-training epochs");
        sub->add_option("--epochs-train", o.epochs_train, "training epochs");
        sub->add_option("--gamma", o.gamma, "focal loss gamma");
        sub->add_option("--n-runs", o.n_runs, "seeds per configuration");
    };

    CLI::App* synth = app.add_subcommand("synth", "emit a synthetic corpus");
    add_common(synth, true);
    synth->add_option("--conversations", o.conversations, "number of dialogues");
    synth->add_option("--utterances-min", o.utterances_min, "utterances per dialogue, low");
    synth->add_option("--utterances-max", o.utterances_max, "utterances per dialogue, high");
    synth->add_option("--noise", o.noise, "feature noise scale");
    synth->add_option("--stickiness", o.stickiness, "emotion Markov stickiness in [0,1)");
    synth->add_option("--emotion-scale", o.emotion_scale, "emotion prototype scale");
    synth->add_option("--intent-scale", o.intent_scale, "intent prototype scale");
    synth->add_option("--peak", o.peak, "conditional mass on the favored intent");
    synth->add_option("--text-dim", o.text_dim, "textual feature dimension");
    synth->add_option("--audio-dim", o.audio_dim, "acoustic feature dimension");
    synth->add_option("--visual-dim", o.visual_dim, "visual feature dimension");

    CLI::App* pretrain = app.add_subcommand("pretrain", "pre-train the task encoders");
    add_common(pretrain, true);
    add_model_opts(pretrain);
    pretrain->add_option("--corpus", o.corpus, "corpus directory")->required();

    CLI::App* train = app.add_subcommand("train", "joint training with best-valid selection");
    add_common(train, true);
    add_model_opts(train);
    train->add_option("--corpus", o.corpus, "corpus directory")->required();
    train->add_option("--pretrained", o.pretrained, "encoders.eiup from a pretrain run");

    CLI::App* evalc = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(evalc, true);
    evalc->add_option("--corpus", o.corpus, "corpus directory")->required();
    evalc->add_option("--checkpoint", o.checkpoint, "model.eiup path")->required();
    evalc->add_option("--split", o.split_name, "train | valid | test | all");

    CLI::App* ablate = app.add_subcommand("ablate", "module/task/modality ablation table");
    add_common(ablate, true);
    add_model_opts(ablate);
    ablate->add_option("--corpus", o.corpus, "corpus directory")->required();
    ablate->add_option("--jobs", o.jobs, "concurrent configurations");
    ablate->add_option("--rows", o.rows, "subset of configuration rows to run");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    add_common(gradcheck, false);
    gradcheck->add_option("--points", o.points, "seeded random points per check");

    CLI::App* vote = app.add_subcommand("vote", "majority-vote annotation finalization");
    add_common(vote, false);
    vote->add_option("--csv", o.csv, "triples csv")->required();
    vote->add_option("--task", o.task, "emotion | intent vocabulary");

    CLI::App* kappa = app.add_subcommand("kappa", "Fleiss kappa over annotation triples");
    add_common(kappa, false);
    kappa->add_option("--csv", o.csv, "triples csv")->required();
    kappa->add_option("--task", o.task, "emotion | intent vocabulary");

    CLI::App* split = app.add_subcommand("split", "7:1:2 dialogue-level split");
    add_common(split, true);
    split->add_option("--corpus", o.corpus, "corpus directory")->required();

    CLI::App* corr = app.add_subcommand("corr", "emotion-intent correlation matrix");
    add_common(corr, false);
    corr->add_option("--corpus", o.corpus, "corpus directory")->required();

    CLI::App* stats = app.add_subcommand("stats", "corpus statistics table");
    add_common(stats, false);
    stats->add_option("--corpus", o.corpus, "corpus directory")->required();

    CLI::App* subs = app.add_subcommand("parse-subs", "subtitle block parser");
    add_common(subs, false);
    subs->add_option("--in", o.input, "subtitle file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        CLI::App* sub = app.get_subcommands().at(0);
        if (!o.config_file.empty()) apply_config_file(sub, load_config_file(o.config_file));

        // vote's default vocabulary is emotion; "joint" only makes sense for training
        if ((sub == vote || sub == kappa) && o.task == "joint") o.task = "emotion";

        if (sub == synth) return run_synth(o);
        if (sub == pretrain) return run_pretrain(o);
        if (sub == train) return run_train(o);
        if (sub == evalc) return run_eval(o);
        if (sub == ablate) return run_ablate(o);
        if (sub == gradcheck) return run_gradcheck(o);
        if (sub == vote) return run_vote(o);
        if (sub == kappa) return run_kappa(o);
        if (sub == split) return run_split(o);
        if (sub == corr) return run_corr(o);
        if (sub == stats) return run_stats(o);
        if (sub == subs) return run_parse_subs(o);
        std::cerr << "error: unhandled subcommand\n";
        return 2;
    } catch (const eiu::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
