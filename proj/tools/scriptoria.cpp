#include <scriptoria/scriptoria.h>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitValidation = 2;

struct CommandError {
  sc_status status;
};

void check(sc_status s) {
  if (s != SC_OK) throw CommandError{s};
}

struct ConfigDeleter {
  void operator()(sc_config* c) const { sc_config_destroy(c); }
};
struct ReportDeleter {
  void operator()(sc_report* r) const { sc_report_destroy(r); }
};
using ConfigPtr = std::unique_ptr<sc_config, ConfigDeleter>;
using ReportPtr = std::unique_ptr<sc_report, ReportDeleter>;

std::string take_string(char* s) {
  std::string out = s ? s : "";
  sc_string_free(s);
  return out;
}

void log_to_stderr(sc_log_level level, const char* msg, void* user) {
  const bool verbose = *static_cast<bool*>(user);
  if (level == SC_LOG_WARNING) {
    std::cerr << "warning: " << msg << "\n";
  } else if (verbose) {
    std::cerr << msg << "\n";
  }
}

void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      std::cerr << "error: cannot write " << tmp.string() << "\n";
      throw CommandError{SC_ERR_IO};
    }
  }
  std::filesystem::rename(tmp, path);
}

// Options shared by every subcommand: a config file, generic overrides and a
// few named shortcuts. Named flags are applied after --set.
struct CommonOptions {
  std::string config_file;
  std::vector<std::string> assignments;
  std::map<std::string, std::string> named;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config_file, "Flat key = value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", assignments, "Override one configuration key (key=value)")->take_all();
    add_named(cmd, "--seed", "seed");
    add_named(cmd, "--mode", "mode");
    add_named(cmd, "--kmeans-k", "kmeans_k");
    add_named(cmd, "--ratio-max", "ratio_max");
    add_named(cmd, "--encoder", "encoder");
    add_named(cmd, "--vlad-k", "vlad_k");
    add_named(cmd, "--codebooks", "n_codebooks");
    add_named(cmd, "--pca-dim", "mvlad_pca_dim");
    add_named(cmd, "--svm-c", "svm_c");
  }

  ConfigPtr build() const {
    sc_config* raw = nullptr;
    check(sc_config_create(&raw));
    ConfigPtr cfg(raw);
    if (!config_file.empty()) check(sc_config_load(cfg.get(), config_file.c_str()));
    for (const auto& a : assignments) {
      const auto eq = a.find('=');
      if (eq == std::string::npos) {
        std::cerr << "error: --set expects key=value, got '" << a << "'\n";
        throw CommandError{SC_ERR_INVALID_ARGUMENT};
      }
      check(sc_config_set(cfg.get(), a.substr(0, eq).c_str(), a.substr(eq + 1).c_str()));
    }
    for (const auto& [key, value] : named) check(sc_config_set(cfg.get(), key.c_str(), value.c_str()));
    check(sc_config_validate(cfg.get()));
    return cfg;
  }

 private:
  void add_named(CLI::App* cmd, const std::string& flag, const std::string& key) {
    cmd->add_option_function<std::string>(flag, [this, key](const std::string& v) { named[key] = v; },
                                          "Sets config key " + key);
  }
};

void emit_report(const sc_report* rep, const std::string& out_path) {
  char* text = nullptr;
  check(sc_report_table(rep, &text));
  std::cout << take_string(text);
  if (!out_path.empty()) {
    char* json = nullptr;
    check(sc_report_json(rep, &json));
    write_atomic(out_path, take_string(json));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Writer identification and retrieval toolkit"};
  app.set_version_flag("--version", std::string(sc_version()));
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Print progress messages");

  std::string manifest, out, store, codebook, model, encodings, src_dir, reference, surrogates;
  bool esvm = false;
  std::map<CLI::App*, std::unique_ptr<CommonOptions>> common;
  auto subcommand = [&](const std::string& name, const std::string& help) {
    CLI::App* cmd = app.add_subcommand(name, help);
    common[cmd] = std::make_unique<CommonOptions>();
    common[cmd]->attach(cmd);
    return cmd;
  };

  CLI::App* extract = subcommand("extract", "Detect keypoints and write a local feature store");
  extract->add_option("-m,--manifest", manifest, "Manifest CSV (path,label,split)")->required();
  extract->add_option("-o,--out", out, "Output store directory")->required();

  CLI::App* cluster = subcommand("cluster", "Fit the surrogate-class codebook on training descriptors");
  cluster->add_option("--store", store, "Feature store directory")->required();
  cluster->add_option("-o,--codebook", codebook, "Output codebook file")->required();
  cluster->add_option("--surrogates", surrogates, "Also export the surrogate dataset to this directory");

  CLI::App* import = subcommand("import-features", "Build a feature store from external LDSC files");
  import->add_option("-m,--manifest", manifest, "Manifest CSV")->required();
  import->add_option("--src", src_dir, "Directory holding <stem>.ldsc files")->required();
  import->add_option("-o,--out", out, "Output store directory")->required();
  import->add_option("--reference", reference, "Extracted store whose keypoint counts must match");

  CLI::App* fit = subcommand("fit-encoders", "Fit the global encoder on the training split");
  fit->add_option("--store", store, "Feature store directory")->required();
  fit->add_option("-o,--model", model, "Output encoder model file")->required();

  CLI::App* encode = subcommand("encode", "Encode every image of a store");
  encode->add_option("--store", store, "Feature store directory")->required();
  encode->add_option("--model", model, "Encoder model file")->required();
  encode->add_option("-o,--out", out, "Output GDSC file")->required();

  CLI::App* evaluate = subcommand("evaluate", "Leave-one-image-out retrieval on the test split");
  evaluate->add_option("--encodings", encodings, "GDSC file")->required();
  evaluate->add_option("-m,--manifest", manifest, "Manifest CSV")->required();
  evaluate->add_flag("--esvm", esvm, "Use exemplar-SVM features");
  evaluate->add_option("-o,--out", out, "Write the JSON report here");

  CLI::App* classify = subcommand("classify", "One-vs-rest SVM classification of the test split");
  classify->add_option("--encodings", encodings, "GDSC file")->required();
  classify->add_option("-m,--manifest", manifest, "Manifest CSV")->required();
  classify->add_option("-o,--out", out, "Write the JSON report here");

  CLI::App* exporter = subcommand("export-surrogates", "Export patches and surrogate labels for training");
  exporter->add_option("--store", store, "Feature store directory")->required();
  exporter->add_option("--codebook", codebook, "Codebook file")->required();
  exporter->add_option("-o,--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  sc_set_log_callback(log_to_stderr, &verbose);
  CLI::App* cmd = app.get_subcommands().front();
  try {
    const ConfigPtr cfg = common.at(cmd)->build();
    if (cmd == extract) {
      sc_extract_stats st{};
      check(sc_extract(cfg.get(), manifest.c_str(), out.c_str(), &st));
      std::cout << "images " << st.images << ", descriptors " << st.keypoints << ", skipped " << st.skipped << "\n";
    } else if (cmd == cluster) {
      sc_cluster_stats st{};
      check(sc_cluster(cfg.get(), store.c_str(), codebook.c_str(), surrogates.empty() ? nullptr : surrogates.c_str(),
                       &st));
      std::cout << "descriptors " << st.descriptors << ", kept " << st.kept << ", classes " << st.populated << "\n";
    } else if (cmd == import) {
      check(sc_import_features(cfg.get(), manifest.c_str(), src_dir.c_str(), out.c_str(),
                               reference.empty() ? nullptr : reference.c_str()));
    } else if (cmd == fit) {
      check(sc_fit_encoder(cfg.get(), store.c_str(), model.c_str()));
    } else if (cmd == encode) {
      check(sc_encode(cfg.get(), store.c_str(), model.c_str(), out.c_str()));
    } else if (cmd == evaluate) {
      sc_report* raw = nullptr;
      check(sc_evaluate(cfg.get(), encodings.c_str(), manifest.c_str(), esvm ? 1 : 0, &raw));
      emit_report(ReportPtr(raw).get(), out);
    } else if (cmd == classify) {
      sc_report* raw = nullptr;
      check(sc_classify(cfg.get(), encodings.c_str(), manifest.c_str(), &raw));
      emit_report(ReportPtr(raw).get(), out);
    } else if (cmd == exporter) {
      sc_cluster_stats st{};
      check(sc_export_surrogates(cfg.get(), store.c_str(), codebook.c_str(), out.c_str(), &st));
      std::cout << "descriptors " << st.descriptors << ", kept " << st.kept << ", classes " << st.populated << "\n";
    }
  } catch (const CommandError& e) {
    const std::string msg = sc_last_error();
    if (!msg.empty()) std::cerr << "error: " << msg << "\n";
    return e.status == SC_ERR_INTERNAL ? kExitInternal : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
