#include "scatterad.h"

#include <cstring>
#include <sstream>
#include <string>

#include "scatterad/config.hpp"
#include "scatterad/data.hpp"
#include "scatterad/errors.hpp"
#include "scatterad/protocols.hpp"
#include "scatterad/trainer.hpp"

using namespace scatterad;

struct sad_config {
    RunConfig cfg;
};

struct sad_dataset {
    TimeSeriesDataset data;
};

struct sad_model {
    ModelState state;
    RunConfig cfg;  // captured at construction; drives training and scoring
};

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

sad_status status_of(const std::exception& e) {
    set_error(e.what());
    if (dynamic_cast<const ConfigError*>(&e)) return SAD_ERR_CONFIG;
    if (dynamic_cast<const DataError*>(&e)) return SAD_ERR_DATA;
    return SAD_ERR_NUMERIC;
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename Fn>
sad_status guarded(Fn&& fn) {
    try {
        fn();
        return SAD_OK;
    } catch (const std::exception& e) {
        return status_of(e);
    }
}

template <typename T, typename Fn>
T* guarded_new(Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        status_of(e);
        return nullptr;
    }
}

}  // namespace

extern "C" {

const char* sad_version(void) { return "0.1.0"; }

const char* sad_last_error(void) { return g_last_error.c_str(); }

void sad_string_free(char* s) { delete[] s; }

sad_config* sad_config_new(void) { return new sad_config{}; }

void sad_config_free(sad_config* cfg) { delete cfg; }

sad_status sad_config_set(sad_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) {
        set_error("sad_config_set: null argument");
        return SAD_ERR_CONFIG;
    }
    return guarded([&] { cfg->cfg.set(key, value); });
}

const char* sad_config_get(const sad_config* cfg, const char* key) {
    if (!cfg || !key) return nullptr;
    if (!cfg->cfg.is_known(key)) {
        set_error(std::string("unknown config key '") + key + "'");
        return nullptr;
    }
    return cfg->cfg.get(key).c_str();
}

sad_status sad_config_load_file(sad_config* cfg, const char* path) {
    if (!cfg || !path) {
        set_error("sad_config_load_file: null argument");
        return SAD_ERR_CONFIG;
    }
    return guarded([&] { cfg->cfg.load_file(path); });
}

size_t sad_config_key_count(void) { return RunConfig::keys().size(); }

sad_status sad_config_key_info(size_t index, const char** key, const char** def,
                               const char** doc) {
    const auto& keys = RunConfig::keys();
    if (index >= keys.size()) {
        set_error("config key index out of range");
        return SAD_ERR_CONFIG;
    }
    if (key) *key = keys[index].key.c_str();
    if (def) *def = keys[index].default_value.c_str();
    if (doc) *doc = keys[index].doc.c_str();
    return SAD_OK;
}

sad_dataset* sad_dataset_load_csv(const char* train_csv, const char* test_csv,
                                  const char* labels_csv) {
    if (!train_csv || !test_csv || !labels_csv) {
        set_error("sad_dataset_load_csv: null path");
        return nullptr;
    }
    return guarded_new<sad_dataset>(
        [&] { return new sad_dataset{load_csv(train_csv, test_csv, labels_csv)}; });
}

sad_dataset* sad_dataset_generate(const sad_config* cfg) {
    if (!cfg) {
        set_error("sad_dataset_generate: null config");
        return nullptr;
    }
    return guarded_new<sad_dataset>(
        [&] { return new sad_dataset{generate_synthetic(cfg->cfg.synthetic_spec())}; });
}

sad_status sad_dataset_save_csv(const sad_dataset* ds, const char* train_csv,
                                const char* test_csv, const char* labels_csv) {
    if (!ds || !train_csv || !test_csv || !labels_csv) {
        set_error("sad_dataset_save_csv: null argument");
        return SAD_ERR_DATA;
    }
    return guarded([&] { save_csv(ds->data, train_csv, test_csv, labels_csv); });
}

sad_dataset* sad_dataset_with_test_noise(const sad_dataset* ds, double sigma,
                                         uint64_t seed) {
    if (!ds) {
        set_error("sad_dataset_with_test_noise: null dataset");
        return nullptr;
    }
    return guarded_new<sad_dataset>(
        [&] { return new sad_dataset{ds->data.with_test_noise(sigma, seed)}; });
}

void sad_dataset_free(sad_dataset* ds) { delete ds; }

size_t sad_dataset_channels(const sad_dataset* ds) {
    return ds ? static_cast<size_t>(ds->data.channels()) : 0;
}

size_t sad_dataset_train_points(const sad_dataset* ds) {
    return ds ? static_cast<size_t>(ds->data.train.rows) : 0;
}

size_t sad_dataset_test_points(const sad_dataset* ds) {
    return ds ? static_cast<size_t>(ds->data.test.rows) : 0;
}

sad_model* sad_model_new(const sad_config* cfg, size_t channels) {
    if (!cfg) {
        set_error("sad_model_new: null config");
        return nullptr;
    }
    return guarded_new<sad_model>([&] {
        return new sad_model{make_model(cfg->cfg, static_cast<int>(channels)), cfg->cfg};
    });
}

sad_model* sad_model_load(const char* path) {
    if (!path) {
        set_error("sad_model_load: null path");
        return nullptr;
    }
    return guarded_new<sad_model>(
        [&] { return new sad_model{load_checkpoint(path), RunConfig{}}; });
}

sad_status sad_model_save(const sad_model* m, const char* path) {
    if (!m || !path) {
        set_error("sad_model_save: null argument");
        return SAD_ERR_DATA;
    }
    return guarded([&] { save_checkpoint(m->state, path); });
}

void sad_model_free(sad_model* m) { delete m; }

sad_status sad_model_train(sad_model* m, const sad_dataset* ds, char** loss_log_csv) {
    if (!m || !ds) {
        set_error("sad_model_train: null argument");
        return SAD_ERR_DATA;
    }
    return guarded([&] {
        auto log = train(m->state, ds->data);
        if (loss_log_csv) *loss_log_csv = dup_string(scatterad::loss_log_csv(log));
    });
}

sad_status sad_model_score(sad_model* m, const sad_dataset* ds, const sad_config* cfg,
                           double* scores, size_t capacity, size_t* length) {
    if (!m || !ds || !length) {
        set_error("sad_model_score: null argument");
        return SAD_ERR_DATA;
    }
    return guarded([&] {
        const ScoreConfig sc = cfg ? cfg->cfg.score_config() : ScoreConfig{};
        auto values = anomaly_scores(m->state, ds->data, sc);
        *length = values.size();
        if (scores) {
            if (capacity < values.size()) throw DataError("score buffer too small");
            std::memcpy(scores, values.data(), values.size() * sizeof(double));
        }
    });
}

sad_status sad_model_embed_csv(sad_model* m, const sad_dataset* ds, char** csv) {
    if (!m || !ds || !csv) {
        set_error("sad_model_embed_csv: null argument");
        return SAD_ERR_DATA;
    }
    return guarded([&] {
        Matrix emb = embed_test(m->state, ds->data);
        std::ostringstream os;
        os << "index";
        for (int j = 0; j < emb.cols; ++j) os << ",z" << j;
        os << '\n';
        char buf[32];
        for (int i = 0; i < emb.rows; ++i) {
            os << i;
            for (int j = 0; j < emb.cols; ++j) {
                std::snprintf(buf, sizeof(buf), ",%.10g", emb.at(i, j));
                os << buf;
            }
            os << '\n';
        }
        *csv = dup_string(os.str());
    });
}

sad_status sad_model_detect_csv(sad_model* m, const sad_dataset* ds,
                                const sad_config* cfg, char** csv) {
    if (!m || !ds || !csv) {
        set_error("sad_model_detect_csv: null argument");
        return SAD_ERR_DATA;
    }
    return guarded([&] {
        const RunConfig& rc = cfg ? cfg->cfg : m->cfg;
        *csv = dup_string(detect_csv(m->state, ds->data, rc));
    });
}

sad_status sad_model_evaluate(sad_model* m, const sad_dataset* ds, const sad_config* cfg,
                              sad_metric_report* report, char** csv_row,
                              char** text_table) {
    if (!m || !ds) {
        set_error("sad_model_evaluate: null argument");
        return SAD_ERR_DATA;
    }
    return guarded([&] {
        const RunConfig& rc = cfg ? cfg->cfg : m->cfg;
        EvalReport rep = evaluate_detection(m->state, ds->data, rc.score_config(),
                                            rc.eval_options());
        if (report) {
            const auto v = rep.metrics.values();
            double* fields[] = {&report->aff_p, &report->aff_r, &report->aff_f,
                                &report->pa_p,  &report->pa_r,  &report->pa_f,
                                &report->auc_roc, &report->auc_pr, &report->r_a_r,
                                &report->r_a_p, &report->v_roc, &report->v_pr};
            for (std::size_t i = 0; i < v.size(); ++i) *fields[i] = v[i];
        }
        if (csv_row) *csv_row = dup_string(rep.metrics.to_csv_row(true));
        if (text_table) {
            std::ostringstream os;
            os << rep.metrics.to_table();
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "\nStatistic                  Truth      Prediction\n"
                          "Total anomaly ratio        %-10.4f %-10.4f\n"
                          "Number of anomaly segments %-10d %-10d\n",
                          rep.macro.anomaly_ratio_truth, rep.macro.anomaly_ratio_pred,
                          rep.macro.num_segments_truth, rep.macro.num_segments_pred);
            os << buf;
            *text_table = dup_string(os.str());
        }
    });
}

sad_status sad_protocol_delta_sweep(sad_model* m, const sad_dataset* ds,
                                    const sad_config* cfg, char** csv) {
    if (!m || !ds || !cfg || !csv) {
        set_error("sad_protocol_delta_sweep: null argument");
        return SAD_ERR_DATA;
    }
    return guarded([&] { *csv = dup_string(delta_sweep_csv(m->state, ds->data, cfg->cfg)); });
}

sad_status sad_protocol_shift_sensitivity(const sad_dataset* ds, const sad_config* cfg,
                                          char** csv) {
    if (!ds || !cfg || !csv) {
        set_error("sad_protocol_shift_sensitivity: null argument");
        return SAD_ERR_DATA;
    }
    return guarded(
        [&] { *csv = dup_string(shift_sensitivity_csv(ds->data.test_labels, cfg->cfg)); });
}

sad_status sad_protocol_scatter_sweep(sad_model* m, const sad_dataset* ds,
                                      const sad_config* cfg, char** csv) {
    if (!m || !ds || !cfg || !csv) {
        set_error("sad_protocol_scatter_sweep: null argument");
        return SAD_ERR_DATA;
    }
    return guarded(
        [&] { *csv = dup_string(scatter_sweep_csv(m->state, ds->data, cfg->cfg)); });
}

sad_status sad_protocol_stability(const sad_dataset* ds, const sad_config* cfg,
                                  char** csv) {
    if (!ds || !cfg || !csv) {
        set_error("sad_protocol_stability: null argument");
        return SAD_ERR_DATA;
    }
    return guarded([&] { *csv = dup_string(stability_protocol(ds->data, cfg->cfg).csv); });
}

sad_status sad_protocol_ablation(const sad_dataset* ds, const sad_config* cfg,
                                 const char* arms_csv, char** csv) {
    if (!ds || !cfg || !arms_csv || !csv) {
        set_error("sad_protocol_ablation: null argument");
        return SAD_ERR_DATA;
    }
    return guarded([&] {
        std::vector<std::string> arms;
        const std::string spec = arms_csv;
        if (spec == "all") {
            arms = RunConfig::ablation_arms();
        } else {
            std::string item;
            std::istringstream is(spec);
            while (std::getline(is, item, ','))
                if (!item.empty()) arms.push_back(item);
        }
        *csv = dup_string(ablation_csv(ds->data, cfg->cfg, arms));
    });
}

}  // extern "C"
