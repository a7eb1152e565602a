// scatterad command-line front end. Drives every workflow through the C API
// in scatterad.h; exit codes mirror sad_status (0 ok, 1 config, 2 data,
// 3 numeric).

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "scatterad.h"

namespace {

struct ConfigHandle {
    sad_config* ptr = sad_config_new();
    ~ConfigHandle() { sad_config_free(ptr); }
};

struct DatasetHandle {
    sad_dataset* ptr = nullptr;
    ~DatasetHandle() { sad_dataset_free(ptr); }
};

struct ModelHandle {
    sad_model* ptr = nullptr;
    ~ModelHandle() { sad_model_free(ptr); }
};

struct OwnedString {
    char* ptr = nullptr;
    ~OwnedString() { sad_string_free(ptr); }
};

int fail(sad_status status) {
    std::fprintf(stderr, "error: %s\n", sad_last_error());
    return static_cast<int>(status);
}

int usage() {
    std::fprintf(stderr,
                 "usage: scatterad <command> [options] [key=value ...]\n"
                 "commands:\n"
                 "  synth       generate a synthetic dataset (train/test/labels CSV)\n"
                 "  train       train a detector; writes checkpoint + loss log\n"
                 "  detect      score the test stream (index,score,label_pred CSV)\n"
                 "  evaluate    twelve-metric report (CSV + text table); --ablate reruns\n"
                 "              training with one component disabled\n"
                 "  simulate    sensitivity | scatter | delta | stability tables\n"
                 "options:\n"
                 "  --config FILE   load key=value lines\n"
                 "  --seed N        shorthand for seed=N\n"
                 "  --out-dir DIR   shorthand for out_dir=DIR\n"
                 "  --checkpoint F  checkpoint to load (evaluate/detect/simulate)\n"
                 "  --ablate ARMS   comma list of arms, or 'all'\n"
                 "  --embeddings    detect: also write per-point embeddings.csv\n"
                 "  --help          list every config key with its default\n");
    return 1;
}

void print_help() {
    std::printf("scatterad %s\n\n", sad_version());
    usage();
    std::printf("\nconfig keys (key = default  # doc):\n");
    for (size_t i = 0; i < sad_config_key_count(); ++i) {
        const char *key = nullptr, *def = nullptr, *doc = nullptr;
        if (sad_config_key_info(i, &key, &def, &doc) == SAD_OK)
            std::printf("  %-22s = %-24s # %s\n", key, def[0] ? def : "\"\"", doc);
    }
}

std::string cfg_get(const ConfigHandle& cfg, const char* key) {
    const char* v = sad_config_get(cfg.ptr, key);
    return v ? v : "";
}

bool write_file(const std::string& path, const char* text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) return false;
    out << (text ? text : "");
    return static_cast<bool>(out);
}

std::string out_path(const ConfigHandle& cfg, const std::string& name) {
    std::filesystem::path dir = cfg_get(cfg, "out_dir");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    return (dir / name).string();
}

int load_dataset(const ConfigHandle& cfg, DatasetHandle& ds) {
    const std::string train = cfg_get(cfg, "data.train_csv");
    const std::string test = cfg_get(cfg, "data.test_csv");
    const std::string labels = cfg_get(cfg, "data.labels_csv");
    if (train.empty() || test.empty() || labels.empty()) {
        std::fprintf(stderr,
                     "error: dataset paths missing; set data.train_csv, data.test_csv, "
                     "and data.labels_csv (or run 'scatterad synth' first)\n");
        return 1;
    }
    ds.ptr = sad_dataset_load_csv(train.c_str(), test.c_str(), labels.c_str());
    if (!ds.ptr) return fail(SAD_ERR_DATA);
    return 0;
}

int load_model(const ConfigHandle& cfg, const std::string& checkpoint, ModelHandle& model) {
    std::string path = checkpoint;
    if (path.empty()) path = out_path(cfg, cfg_get(cfg, "io.checkpoint"));
    model.ptr = sad_model_load(path.c_str());
    if (!model.ptr) return fail(SAD_ERR_DATA);
    return 0;
}

int cmd_synth(const ConfigHandle& cfg) {
    DatasetHandle ds;
    ds.ptr = sad_dataset_generate(cfg.ptr);
    if (!ds.ptr) return fail(SAD_ERR_CONFIG);
    const std::string train = out_path(cfg, "train.csv");
    const std::string test = out_path(cfg, "test.csv");
    const std::string labels = out_path(cfg, "labels.csv");
    sad_status st = sad_dataset_save_csv(ds.ptr, train.c_str(), test.c_str(), labels.c_str());
    if (st != SAD_OK) return fail(st);
    std::printf("wrote %s (%zu pts), %s (%zu pts), %s\n", train.c_str(),
                sad_dataset_train_points(ds.ptr), test.c_str(),
                sad_dataset_test_points(ds.ptr), labels.c_str());
    return 0;
}

int cmd_train(const ConfigHandle& cfg) {
    DatasetHandle ds;
    if (int rc = load_dataset(cfg, ds)) return rc;
    ModelHandle model;
    model.ptr = sad_model_new(cfg.ptr, sad_dataset_channels(ds.ptr));
    if (!model.ptr) return fail(SAD_ERR_CONFIG);
    OwnedString log;
    sad_status st = sad_model_train(model.ptr, ds.ptr, &log.ptr);
    if (st != SAD_OK) return fail(st);
    const std::string log_path = out_path(cfg, "loss_log.csv");
    const std::string ckpt_path = out_path(cfg, cfg_get(cfg, "io.checkpoint"));
    if (!write_file(log_path, log.ptr)) {
        std::fprintf(stderr, "error: cannot write %s\n", log_path.c_str());
        return 2;
    }
    st = sad_model_save(model.ptr, ckpt_path.c_str());
    if (st != SAD_OK) return fail(st);
    // report how much of the training stream the window grid covered
    const long total = static_cast<long>(sad_dataset_train_points(ds.ptr));
    const long window = std::atol(cfg_get(cfg, "train.window").c_str());
    long stride = std::atol(cfg_get(cfg, "train.stride").c_str());
    if (stride <= 0) stride = window;
    if (window > 0 && total >= window) {
        const long count = (total - window) / stride + 1;
        const long dropped = total - ((count - 1) * stride + window);
        if (dropped > 0)
            std::printf("note: %ld trailing training points shorter than one window "
                        "were dropped\n", dropped);
    }
    std::printf("wrote %s and %s\n", ckpt_path.c_str(), log_path.c_str());
    return 0;
}

int cmd_detect(const ConfigHandle& cfg, const std::string& checkpoint, bool embeddings) {
    DatasetHandle ds;
    if (int rc = load_dataset(cfg, ds)) return rc;
    ModelHandle model;
    if (int rc = load_model(cfg, checkpoint, model)) return rc;
    OwnedString csv;
    sad_status st = sad_model_detect_csv(model.ptr, ds.ptr, cfg.ptr, &csv.ptr);
    if (st != SAD_OK) return fail(st);
    const std::string path = out_path(cfg, "scores.csv");
    if (!write_file(path, csv.ptr)) {
        std::fprintf(stderr, "error: cannot write %s\n", path.c_str());
        return 2;
    }
    // scores cover whole windows only; note any dropped tail
    size_t covered = 0;
    for (const char* p = csv.ptr; *p; ++p) covered += *p == '\n';
    if (covered > 0) --covered;  // header
    const size_t total = sad_dataset_test_points(ds.ptr);
    if (covered < total)
        std::printf("note: %zu trailing points shorter than one window were dropped\n",
                    total - covered);
    std::printf("wrote %s\n", path.c_str());
    if (embeddings) {
        OwnedString emb;
        st = sad_model_embed_csv(model.ptr, ds.ptr, &emb.ptr);
        if (st != SAD_OK) return fail(st);
        const std::string emb_path = out_path(cfg, "embeddings.csv");
        if (!write_file(emb_path, emb.ptr)) return 2;
        std::printf("wrote %s\n", emb_path.c_str());
    }
    return 0;
}

int cmd_evaluate(const ConfigHandle& cfg, const std::string& checkpoint,
                 const std::string& ablate) {
    DatasetHandle ds;
    if (int rc = load_dataset(cfg, ds)) return rc;
    if (!ablate.empty() && ablate != "none") {
        OwnedString csv;
        sad_status st = sad_protocol_ablation(ds.ptr, cfg.ptr, ablate.c_str(), &csv.ptr);
        if (st != SAD_OK) return fail(st);
        const std::string path = out_path(cfg, "ablation.csv");
        if (!write_file(path, csv.ptr)) return 2;
        std::printf("%swrote %s\n", csv.ptr, path.c_str());
        return 0;
    }
    ModelHandle model;
    if (int rc = load_model(cfg, checkpoint, model)) return rc;
    sad_metric_report report{};
    OwnedString csv, table;
    sad_status st =
        sad_model_evaluate(model.ptr, ds.ptr, cfg.ptr, &report, &csv.ptr, &table.ptr);
    if (st != SAD_OK) return fail(st);
    const std::string csv_path = out_path(cfg, "metrics.csv");
    const std::string table_path = out_path(cfg, "metrics.txt");
    if (!write_file(csv_path, csv.ptr) || !write_file(table_path, table.ptr)) return 2;
    std::printf("%s", table.ptr);
    std::printf("wrote %s and %s\n", csv_path.c_str(), table_path.c_str());
    return 0;
}

int cmd_simulate(const ConfigHandle& cfg, const std::string& what,
                 const std::string& checkpoint) {
    DatasetHandle ds;
    if (int rc = load_dataset(cfg, ds)) return rc;
    OwnedString csv;
    sad_status st = SAD_OK;
    std::string out_name;
    if (what == "sensitivity") {
        st = sad_protocol_shift_sensitivity(ds.ptr, cfg.ptr, &csv.ptr);
        out_name = "sensitivity.csv";
    } else if (what == "stability") {
        st = sad_protocol_stability(ds.ptr, cfg.ptr, &csv.ptr);
        out_name = "stability.csv";
    } else if (what == "scatter" || what == "delta") {
        ModelHandle model;
        if (int rc = load_model(cfg, checkpoint, model)) return rc;
        st = what == "scatter"
                 ? sad_protocol_scatter_sweep(model.ptr, ds.ptr, cfg.ptr, &csv.ptr)
                 : sad_protocol_delta_sweep(model.ptr, ds.ptr, cfg.ptr, &csv.ptr);
        out_name = what + ".csv";
    } else {
        std::fprintf(stderr, "error: unknown simulate protocol '%s' "
                             "(expected sensitivity|scatter|delta|stability)\n",
                     what.c_str());
        return 1;
    }
    if (st != SAD_OK) return fail(st);
    const std::string path = out_path(cfg, out_name);
    if (!write_file(path, csv.ptr)) return 2;
    std::printf("%swrote %s\n", csv.ptr, path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) return usage();
    std::string command = argv[1];
    if (command == "--help" || command == "-h" || command == "help") {
        print_help();
        return 0;
    }

    std::string subcommand, checkpoint, ablate;
    bool embeddings = false;
    ConfigHandle cfg;
    int i = 2;
    if (command == "simulate") {
        if (argc < 3) return usage();
        subcommand = argv[2];
        i = 3;
    }
    for (; i < argc; ++i) {
        const std::string arg = argv[i];
        auto next = [&]() -> const char* {
            if (i + 1 >= argc) {
                std::fprintf(stderr, "error: %s needs a value\n", arg.c_str());
                return nullptr;
            }
            return argv[++i];
        };
        if (arg == "--help" || arg == "-h") {
            print_help();
            return 0;
        } else if (arg == "--config") {
            const char* v = next();
            if (!v) return 1;
            if (sad_config_load_file(cfg.ptr, v) != SAD_OK) return fail(SAD_ERR_CONFIG);
        } else if (arg == "--seed") {
            const char* v = next();
            if (!v) return 1;
            if (sad_config_set(cfg.ptr, "seed", v) != SAD_OK) return fail(SAD_ERR_CONFIG);
        } else if (arg == "--out-dir") {
            const char* v = next();
            if (!v) return 1;
            if (sad_config_set(cfg.ptr, "out_dir", v) != SAD_OK) return fail(SAD_ERR_CONFIG);
        } else if (arg == "--checkpoint") {
            const char* v = next();
            if (!v) return 1;
            checkpoint = v;
        } else if (arg == "--ablate") {
            const char* v = next();
            if (!v) return 1;
            ablate = v;
        } else if (arg == "--embeddings") {
            embeddings = true;
        } else if (arg.find('=') != std::string::npos) {
            const auto eq = arg.find('=');
            if (sad_config_set(cfg.ptr, arg.substr(0, eq).c_str(),
                               arg.substr(eq + 1).c_str()) != SAD_OK)
                return fail(SAD_ERR_CONFIG);
        } else {
            std::fprintf(stderr, "error: unexpected argument '%s'\n", arg.c_str());
            return 1;
        }
    }
    if (ablate.empty()) ablate = cfg_get(cfg, "ablate");

    if (command == "synth") return cmd_synth(cfg);
    if (command == "train") return cmd_train(cfg);
    if (command == "detect") return cmd_detect(cfg, checkpoint, embeddings);
    if (command == "evaluate") return cmd_evaluate(cfg, checkpoint, ablate);
    if (command == "simulate") return cmd_simulate(cfg, subcommand, checkpoint);
    std::fprintf(stderr, "error: unknown command '%s'\n", command.c_str());
    return usage();
}
