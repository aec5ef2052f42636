// Python bindings for the main operations: tensor softmax, focal loss,
// metrics, annotation tools, subtitle/CSV parsing, the synthetic corpus
// generator, the gradient audit and a forward-only model wrapper.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "eiu/annotate.hpp"
#include "eiu/corpus.hpp"
#include "eiu/gradaudit.hpp"
#include "eiu/split.hpp"
#include "eiu/stats.hpp"
#include "eiu/subtitle.hpp"
#include "eiu/synth.hpp"
#include "eiu/train.hpp"

namespace py = pybind11;

namespace {

eiu::Tensor to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    eiu::Shape shape;
    for (py::ssize_t d = 0; d < arr.ndim(); ++d) {
        shape.push_back(static_cast<std::size_t>(arr.shape(d)));
    }
    std::vector<double> data(arr.data(), arr.data() + arr.size());
    return eiu::Tensor(std::move(shape), std::move(data));
}

py::array_t<double> to_array(const eiu::Tensor& t) {
    std::vector<py::ssize_t> shape;
    for (auto d : t.shape()) shape.push_back(static_cast<py::ssize_t>(d));
    py::array_t<double> out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

eiu::ModelConfig config_from_dict(const py::dict& d) {
    eiu::ModelConfig cfg;
    if (d.contains("hidden")) cfg.hidden = d["hidden"].cast<std::size_t>();
    if (d.contains("heads")) cfg.heads = d["heads"].cast<std::size_t>();
    if (d.contains("n_emotions")) cfg.n_emotions = d["n_emotions"].cast<std::size_t>();
    if (d.contains("n_intents")) cfg.n_intents = d["n_intents"].cast<std::size_t>();
    if (d.contains("text_dim")) cfg.text_dim = d["text_dim"].cast<std::size_t>();
    if (d.contains("audio_dim")) cfg.audio_dim = d["audio_dim"].cast<std::size_t>();
    if (d.contains("visual_dim")) cfg.visual_dim = d["visual_dim"].cast<std::size_t>();
    if (d.contains("kernel_widths")) {
        cfg.kernel_widths = d["kernel_widths"].cast<std::vector<std::size_t>>();
    }
    if (d.contains("filters_per_width")) {
        cfg.filters_per_width = d["filters_per_width"].cast<std::size_t>();
    }
    if (d.contains("ff_dim")) cfg.ff_dim = d["ff_dim"].cast<std::size_t>();
    if (d.contains("use_history")) cfg.use_history = d["use_history"].cast<bool>();
    if (d.contains("use_interaction")) cfg.use_interaction = d["use_interaction"].cast<bool>();
    if (d.contains("use_gate")) cfg.use_gate = d["use_gate"].cast<bool>();
    if (d.contains("modalities")) {
        const std::string tag = d["modalities"].cast<std::string>();
        cfg.modality_mask.textual = tag.find('t') != std::string::npos;
        cfg.modality_mask.acoustic = tag.find('a') != std::string::npos;
        cfg.modality_mask.visual = tag.find('v') != std::string::npos;
    }
    cfg.validate();
    return cfg;
}

eiu::UtteranceFeatures features_from_dict(const py::dict& d) {
    eiu::UtteranceFeatures f;
    if (d.contains("textual") && !d["textual"].is_none()) {
        f.textual = to_tensor(d["textual"].cast<py::array_t<double>>());
    }
    if (d.contains("acoustic") && !d["acoustic"].is_none()) {
        f.acoustic = to_tensor(d["acoustic"].cast<py::array_t<double>>());
    }
    if (d.contains("visual") && !d["visual"].is_none()) {
        f.visual = to_tensor(d["visual"].cast<py::array_t<double>>());
    }
    return f;
}

// forward-only wrapper over the network with deterministic initialization
class PyModel {
public:
    PyModel(const py::dict& config, std::uint64_t seed)
        : cfg_(config_from_dict(config)), state_(eiu::init_model(cfg_, seed)) {}

    py::tuple forward(const py::dict& features, const py::list& history) {
        eiu::Conversation conv;
        conv.dia_no = 0;
        std::int64_t n = 0;
        for (const auto& h : history) {
            eiu::Utterance u;
            u.record.utt_no = n++;
            u.features = features_from_dict(h.cast<py::dict>());
            conv.utterances.push_back(std::move(u));
        }
        eiu::Utterance cur;
        cur.record.utt_no = n;
        cur.features = features_from_dict(features);
        conv.utterances.push_back(std::move(cur));

        eiu::ForwardTrace tr =
            eiu::forward(state_, cfg_, conv, conv.utterances.size() - 1);
        return py::make_tuple(to_array(tr.logits_e), to_array(tr.logits_i));
    }

    void save(const std::string& path) const { eiu::save_checkpoint(path, state_.params); }

    void load(const std::string& path) { state_.load_values(eiu::load_checkpoint(path)); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& [p, t] : state_.params) n += t.size();
        return n;
    }

private:
    eiu::ModelConfig cfg_;
    eiu::ModelState state_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "emotion-intent joint understanding: core operations";

    py::register_exception<eiu::Error>(m, "EiuError");

    m.def("emotion_labels", [] { return eiu::emotion_labels(); });
    m.def("intent_labels", [] { return eiu::intent_labels(); });

    m.def(
        "softmax",
        [](const py::array_t<double>& x, std::size_t axis) {
            return to_array(eiu::softmax(to_tensor(x), axis));
        },
        py::arg("x"), py::arg("axis") = 0);

    m.def(
        "focal_loss",
        [](const py::array_t<double>& logits, std::size_t true_class, double gamma) {
            return eiu::focal_loss(to_tensor(logits), true_class, gamma).item();
        },
        py::arg("logits"), py::arg("true_class"), py::arg("gamma") = 2.0);

    m.def("lr_factor", &eiu::lr_factor, py::arg("epoch"), py::arg("total_epochs"));

    m.def(
        "metrics",
        [](const std::vector<std::size_t>& truths, const std::vector<std::size_t>& preds,
           std::size_t n_classes) {
            eiu::MetricsReport r = eiu::compute_metrics(truths, preds, n_classes);
            py::dict d;
            d["waf"] = r.waf;
            d["f1"] = r.f1;
            d["precision"] = r.precision;
            d["recall"] = r.recall;
            d["support"] = r.support;
            d["confusion"] = r.confusion;
            d["samples"] = r.samples;
            return d;
        },
        py::arg("truths"), py::arg("preds"), py::arg("n_classes"));

    m.def(
        "fleiss_kappa",
        [](const std::vector<std::vector<std::size_t>>& counts) {
            eiu::KappaResult r = eiu::fleiss_kappa(counts);
            py::dict d;
            d["kappa"] = r.kappa;
            d["p_bar"] = r.p_bar;
            d["p_e"] = r.p_e;
            d["items"] = r.items;
            d["raters"] = r.raters;
            d["degenerate"] = r.degenerate;
            return d;
        },
        py::arg("counts"));

    m.def(
        "majority_vote",
        [](const std::vector<std::string>& labels, const std::string& task,
           const std::optional<std::string>& expert) {
            if (labels.size() != 3) {
                throw eiu::ContractError("majority_vote expects exactly three labels");
            }
            eiu::AnnotationTriple t;
            t.labels = {labels[0], labels[1], labels[2]};
            t.expert = expert;
            const auto& vocab =
                task == "intent" ? eiu::intent_labels() : eiu::emotion_labels();
            eiu::VoteResult r = eiu::majority_vote(t, vocab);
            return py::make_tuple(r.label ? py::cast(*r.label) : py::none(), r.no_majority);
        },
        py::arg("labels"), py::arg("task") = "emotion", py::arg("expert") = py::none());

    m.def(
        "correlation_matrix",
        [](const std::vector<std::size_t>& emotions, const std::vector<std::size_t>& intents) {
            if (emotions.size() != intents.size()) {
                throw eiu::ContractError("emotions and intents must have equal length");
            }
            std::vector<eiu::AnnotationRecord> records(emotions.size());
            for (std::size_t i = 0; i < emotions.size(); ++i) {
                records[i].emotion = emotions[i];
                records[i].intent = intents[i];
            }
            auto m2 = eiu::correlation_matrix(records);
            py::array_t<std::size_t> out({m2.size(), m2[0].size()});
            auto view = out.mutable_unchecked<2>();
            for (std::size_t e = 0; e < m2.size(); ++e) {
                for (std::size_t i = 0; i < m2[0].size(); ++i) view(e, i) = m2[e][i];
            }
            return out;
        },
        py::arg("emotions"), py::arg("intents"));

    m.def(
        "parse_srt",
        [](const std::string& text) {
            py::list out;
            for (const auto& e : eiu::parse_subtitle_file(text)) {
                py::dict d;
                d["index"] = e.index;
                d["begin_ms"] = e.begin_ms;
                d["end_ms"] = e.end_ms;
                d["text"] = e.text;
                out.append(d);
            }
            return out;
        },
        py::arg("text"));

    m.def(
        "parse_annotations",
        [](const std::string& csv) {
            py::list out;
            for (const auto& r : eiu::parse_annotations_csv(csv)) {
                py::dict d;
                d["subtitle"] = r.subtitle;
                d["dia_no"] = r.dia_no;
                d["utt_no"] = r.utt_no;
                d["video_name"] = r.video_name;
                d["season"] = r.season ? py::cast(*r.season) : py::none();
                d["episode"] = r.episode;
                d["begin_ms"] = r.begin_ms;
                d["end_ms"] = r.end_ms;
                d["emotion"] = eiu::emotion_labels()[r.emotion];
                d["intent"] = eiu::intent_labels()[r.intent];
                d["speaker"] = r.speaker;
                out.append(d);
            }
            return out;
        },
        py::arg("csv"));

    m.def("read_feature_file",
          [](const std::string& path) { return to_array(eiu::read_feature_file(path)); });
    m.def("write_feature_file", [](const std::string& path, const py::array_t<double>& arr) {
        eiu::write_feature_file(path, to_tensor(arr));
    });

    m.def(
        "synth_corpus",
        [](const std::string& out_dir, std::uint64_t seed, std::size_t conversations,
           std::size_t utterances, double noise, double stickiness) {
            eiu::SynthConfig cfg = eiu::SynthConfig::defaults();
            cfg.seed = seed;
            cfg.n_conversations = conversations;
            cfg.min_utterances = cfg.max_utterances = utterances;
            cfg.noise = noise;
            cfg.stickiness = stickiness;
            eiu::SynthCorpus corpus = eiu::synth_corpus(cfg);
            eiu::write_synth_corpus(corpus, out_dir);
            py::dict d;
            d["conversations"] = corpus.conversations.size();
            d["utterances"] = corpus.records.size();
            return d;
        },
        py::arg("out_dir"), py::arg("seed") = 0, py::arg("conversations") = 16,
        py::arg("utterances") = 8, py::arg("noise") = 0.1, py::arg("stickiness") = 0.0);

    m.def(
        "gradient_audit",
        [](std::uint64_t seed, std::size_t points) {
            eiu::AuditReport r = eiu::gradient_audit(seed, points);
            py::dict d;
            d["worst"] = r.worst;
            d["worst_name"] = r.worst_name;
            py::dict entries;
            for (const auto& e : r.entries) entries[py::cast(e.name)] = e.max_rel_err;
            d["entries"] = entries;
            return d;
        },
        py::arg("seed") = 42, py::arg("points") = 1);

    py::class_<PyModel>(m, "Model")
        .def(py::init<const py::dict&, std::uint64_t>(), py::arg("config") = py::dict(),
             py::arg("seed") = 0)
        .def("forward", &PyModel::forward, py::arg("features"),
             py::arg("history") = py::list())
        .def("save", &PyModel::save, py::arg("path"))
        .def("load", &PyModel::load, py::arg("path"))
        .def_property_readonly("parameter_count", &PyModel::parameter_count);
}
