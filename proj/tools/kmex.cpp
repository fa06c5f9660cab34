// kmex: convert trained classifiers into prototype-based self-explainable
// models and evaluate them (ghosting, diversity, explanation faithfulness,
// relevance-ordering robustness, attribute coverage).

#include "kmex/evaluate.hpp"
#include "kmex/idx.hpp"
#include "kmex/kmx_io.hpp"
#include "kmex/svg.hpp"
#include "kmex/train.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace kmex;

namespace {

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> values;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            values.push_back(std::stoi(cell));
        } catch (const std::exception&) {
            fail("cannot parse \"", cell, "\" as an integer");
        }
    }
    require(!values.empty(), "empty integer list");
    return values;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            seeds.push_back(std::stoull(cell));
        } catch (const std::exception&) {
            fail("cannot parse \"", cell, "\" as a seed");
        }
    }
    require(!seeds.empty(), "empty seed list");
    return seeds;
}

void require_input_file(const std::string& path) {
    require(fs::is_regular_file(path), "input file \"", path, "\" does not exist");
}

void check_output(const std::string& path, bool overwrite) {
    require(overwrite || !fs::exists(path), "output \"", path,
            "\" already exists (use --overwrite)");
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buffer[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buffer, sizeof(buffer), "%Y%m%d-%H%M%S", &tm_utc);
    return buffer;
}

/// Shared flag bundle; every command registers only the flags it uses.
struct Options {
    std::string model, weights, data, labels, attrs, out;
    std::string test_data, test_labels;
    std::string prototypes_per_class = "5";
    std::string similarity = "neg_l2";
    double similarity_epsilon = 1e-4;
    std::string seed = "42";
    int restarts = 5;
    int subsample = 0;
    int ro_steps = 50;
    int eval_images = 100;
    int threads = 1;
    bool overwrite = false;
    bool bisecting = false;

    // train-toy only
    int classes = 3;
    int train_count = 2000;
    int test_count = 500;
    int image_size = 16;
    double separation = 5.0;
    int epochs = 10;
    double learning_rate = 0.01;
    int batch_size = 32;
    bool attributed = false;

    Similarity make_similarity() const {
        return Similarity{similarity_from_string(similarity), similarity_epsilon};
    }
};

void add_model_flags(CLI::App* cmd, Options& opt) {
    cmd->add_option("--model", opt.model, "model.json path")->required();
    cmd->add_option("--weights", opt.weights, "weights.bin path")->required();
}

void add_data_flags(CLI::App* cmd, Options& opt) {
    cmd->add_option("--data", opt.data, "training images (IDX)")->required();
    cmd->add_option("--labels", opt.labels, "training labels (IDX)")->required();
}

void add_convert_flags(CLI::App* cmd, Options& opt) {
    cmd->add_option("--prototypes-per-class", opt.prototypes_per_class,
                    "prototypes per class: one int or a per-class comma list");
    cmd->add_option("--similarity", opt.similarity,
                    "similarity measure (neg_l2, neg_l1, neg_sq_l2, log_l2, protopnet_log, "
                    "dot, cosine, neg_ned)");
    cmd->add_option("--similarity-epsilon", opt.similarity_epsilon,
                    "epsilon of the log-form similarities");
    cmd->add_option("--restarts", opt.restarts, "k-means restarts");
    cmd->add_option("--subsample", opt.subsample,
                    "cluster on at most this many samples per class (0: all)");
    cmd->add_flag("--bisecting", opt.bisecting, "use bisecting k-means");
}

NormStats stats_for(const LoadedModel& model, const Dataset& train) {
    if (model.normalization) return *model.normalization;
    log_info("model carries no normalization stats; computing them from the training data");
    return compute_norm_stats(train);
}

std::map<std::string, std::string> base_config(const Options& opt,
                                               const std::string& command) {
    std::map<std::string, std::string> config;
    config["command"] = command;
    config["similarity"] = opt.similarity;
    config["similarity_epsilon"] = std::to_string(opt.similarity_epsilon);
    config["prototypes_per_class"] = opt.prototypes_per_class;
    config["seed"] = opt.seed;
    config["restarts"] = std::to_string(opt.restarts);
    config["subsample"] = std::to_string(opt.subsample);
    config["bisecting"] = opt.bisecting ? "1" : "0";
    return config;
}

int cmd_train_toy(const Options& opt) {
    require(opt.image_size % 4 == 0 && opt.image_size >= 8,
            "--image-size must be a multiple of 4 and at least 8");
    require(opt.classes >= 2, "--classes must be at least 2");
    require(opt.train_count >= opt.classes && opt.test_count >= opt.classes,
            "--train-count/--test-count must cover every class");
    fs::create_directories(opt.out);
    const std::string model_path = (fs::path(opt.out) / "model.json").string();
    check_output(model_path, opt.overwrite);

    const std::uint64_t seed = parse_seed_list(opt.seed)[0];
    const int per_class_train = opt.train_count / opt.classes;
    const int per_class_test = opt.test_count / opt.classes;

    // One generator run for both splits so the class templates match.
    Dataset train, test;
    if (opt.attributed) {
        const std::vector<AttributeFactor> spec = {
            {"factor0", 0.5, -1, 0.0}, {"factor1", 0.5, 0, 0.7},
            {"factor2", 0.3, -1, 0.0}, {"factor3", 0.3, 2, 0.7},
            {"factor4", 0.2, -1, 0.0}, {"factor5", 0.2, 4, 0.6},
            {"factor6", 0.1, -1, 0.0}, {"factor7", 0.05, -1, 0.0},
        };
        auto [data, table] = gen_attributed_toy(split_seed(seed, "data"), opt.classes,
                                                per_class_train + per_class_test, spec,
                                                opt.image_size);
        auto split = split_by_class(data, per_class_train);
        train = std::move(split.train);
        test = std::move(split.test);
        AttributeTable train_table;
        train_table.names = table.names;
        train_table.values.resize(static_cast<Eigen::Index>(split.train_rows.size()),
                                  table.values.cols());
        for (std::size_t r = 0; r < split.train_rows.size(); ++r) {
            train_table.values.row(static_cast<Eigen::Index>(r)) =
                table.values.row(static_cast<Eigen::Index>(split.train_rows[r]));
        }
        save_attributes_csv((fs::path(opt.out) / "attrs.csv").string(), train_table);
    } else {
        const Dataset data =
            gen_blob_images(split_seed(seed, "data"), opt.classes,
                            per_class_train + per_class_test, opt.image_size, opt.separation);
        auto split = split_by_class(data, per_class_train);
        train = std::move(split.train);
        test = std::move(split.test);
    }

    LayerStack stack;
    stack.input = {1, opt.image_size, opt.image_size};
    stack.layers = {LayerSpec::conv2d(1, 32, 3, 3, 1, 1),
                    LayerSpec::relu(),
                    LayerSpec::maxpool2(),
                    LayerSpec::conv2d(32, 64, 3, 3, 1, 1),
                    LayerSpec::relu(),
                    LayerSpec::maxpool2(),
                    LayerSpec::global_avgpool(),
                    LayerSpec::dense(64, opt.classes),
                    LayerSpec::softmax()};
    stack.encoder_cut = 7;
    validate(stack);

    const NormStats stats = compute_norm_stats(train);
    const auto train_images = normalize_images(train.images, stats);
    const auto test_images = normalize_images(test.images, stats);

    TrainConfig train_config;
    train_config.seed = split_seed(seed, "train");
    train_config.epochs = opt.epochs;
    train_config.learning_rate = opt.learning_rate;
    train_config.batch_size = opt.batch_size;
    log_info("training toy model (", opt.epochs, " epochs, ", train.size(), " samples)");
    const auto result = train_sgd(stack, train_images, train.labels, train_config);

    save_model(model_path, (fs::path(opt.out) / "weights.bin").string(), stack,
               result.weights, stats);
    write_idx_images((fs::path(opt.out) / "train-images.idx").string(), train.images);
    write_idx_labels((fs::path(opt.out) / "train-labels.idx").string(), train.labels);
    write_idx_images((fs::path(opt.out) / "test-images.idx").string(), test.images);
    write_idx_labels((fs::path(opt.out) / "test-labels.idx").string(), test.labels);

    const double train_acc = accuracy_percent(stack, result.weights, train_images, train.labels);
    const double test_acc = accuracy_percent(stack, result.weights, test_images, test.labels);
    std::cout << "train accuracy: " << train_acc << "%\n"
              << "test accuracy:  " << test_acc << "%\n"
              << "model written to " << model_path << "\n";
    return 0;
}

int cmd_embed(const Options& opt) {
    require_input_file(opt.model);
    require_input_file(opt.weights);
    require_input_file(opt.data);
    require_input_file(opt.labels);
    fs::create_directories(opt.out);
    const std::string emb_path = (fs::path(opt.out) / "embeddings.kmx").string();
    const std::string lab_path = (fs::path(opt.out) / "labels.kmx").string();
    check_output(emb_path, opt.overwrite);

    const LoadedModel model = load_model(opt.model, opt.weights);
    const Dataset data = load_idx(opt.data, opt.labels);
    const auto images = normalize_images(data.images, stats_for(model, data));

    Embeddings emb = embed_dataset(model.stack, model.weights, images, model.weights_hash,
                                   opt.threads);
    save_embeddings(emb_path, emb);
    save_labels_kmx(lab_path, data.labels);

    // Round-trip check: the file must reproduce the matrix bit for bit.
    const Embeddings back = load_embeddings(emb_path);
    require(back.matrix.rows() == emb.matrix.rows() &&
                back.matrix.cols() == emb.matrix.cols() &&
                std::memcmp(back.matrix.data(), emb.matrix.data(),
                            sizeof(float) * emb.matrix.size()) == 0,
            "embedding round-trip mismatch in \"", emb_path, "\"");
    std::cout << "wrote " << emb.count() << "x" << emb.dim() << " embeddings to " << emb_path
              << "\n";
    return 0;
}

int cmd_convert(const Options& opt) {
    require_input_file(opt.model);
    require_input_file(opt.weights);
    require_input_file(opt.data);
    require_input_file(opt.labels);
    fs::create_directories(opt.out);
    const std::string kmx_path = (fs::path(opt.out) / "protos.kmx").string();
    const std::string json_path = (fs::path(opt.out) / "protos.json").string();
    check_output(kmx_path, opt.overwrite);

    const LoadedModel model = load_model(opt.model, opt.weights);
    const Dataset data = load_idx(opt.data, opt.labels);
    const auto images = normalize_images(data.images, stats_for(model, data));

    ConvertConfig config;
    config.per_class_count = parse_int_list(opt.prototypes_per_class);
    config.similarity = opt.make_similarity();
    config.seed = parse_seed_list(opt.seed)[0];
    config.restarts = opt.restarts;
    config.subsample = opt.subsample;
    config.bisecting = opt.bisecting;

    Embeddings emb = embed_dataset(model.stack, model.weights, images, model.weights_hash,
                                   opt.threads);
    PrototypeSet protos = prototypes_from_embeddings(emb, data.labels, data.num_classes,
                                                     config, opt.threads);
    save_prototypes(kmx_path, json_path, protos);

    std::vector<Tensorf> gallery;
    std::vector<std::string> captions;
    for (Eigen::Index r = 0; r < protos.count(); ++r) {
        gallery.push_back(data.images[protos.representative[r]]);
        char caption[64];
        std::snprintf(caption, sizeof(caption), "class %d (%.2f)", protos.proto_class[r],
                      protos.importance[r]);
        captions.push_back(caption);
    }
    const int columns = static_cast<int>(protos.count()) / protos.num_classes;
    atomic_write((fs::path(opt.out) / "gallery.svg").string(),
                 image_grid_svg(gallery, captions, std::max(columns, 1)));

    std::cout << "wrote " << protos.count() << " prototypes to " << kmx_path << "\n";
    return 0;
}

int cmd_evaluate(const Options& opt) {
    require_input_file(opt.model);
    require_input_file(opt.weights);
    require_input_file(opt.data);
    require_input_file(opt.labels);
    require_input_file(opt.test_data);
    require_input_file(opt.test_labels);
    if (!opt.attrs.empty()) require_input_file(opt.attrs);
    fs::create_directories(opt.out);

    const LoadedModel model = load_model(opt.model, opt.weights);
    const Dataset train = load_idx(opt.data, opt.labels);
    const Dataset test = load_idx(opt.test_data, opt.test_labels);
    AttributeTable attrs;
    if (!opt.attrs.empty()) attrs = load_attributes_csv(opt.attrs);

    EvalConfig config;
    config.per_class_count = parse_int_list(opt.prototypes_per_class);
    config.similarity = opt.make_similarity();
    config.restarts = opt.restarts;
    config.subsample = opt.subsample;
    config.ro_steps = opt.ro_steps;
    config.eval_images = opt.eval_images;
    config.threads = opt.threads;
    config.bisecting = opt.bisecting;
    const auto seeds = parse_seed_list(opt.seed);

    AggregateReport report =
        evaluate_model(model.stack, model.weights, stats_for(model, train), train, test,
                       opt.attrs.empty() ? nullptr : &attrs, config, seeds);

    report.config = base_config(opt, "evaluate");
    report.config["ro_steps"] = std::to_string(opt.ro_steps);
    report.config["eval_images"] = std::to_string(opt.eval_images);
    report.config["model_hash"] = model.weights_hash;
    report.config["data_hash"] = hash_file(opt.data);
    report.config["test_data_hash"] = hash_file(opt.test_data);
    if (!opt.attrs.empty()) report.config["attrs_hash"] = hash_file(opt.attrs);
    report.config_hash = config_hash(report.config);

    // Reports are append-only: an existing report.json stays untouched and
    // the rerun lands in a timestamped file instead.
    std::string report_path = (fs::path(opt.out) / "report.json").string();
    if (fs::exists(report_path) && !opt.overwrite) {
        report_path = (fs::path(opt.out) / ("report-" + timestamp_utc() + ".json")).string();
    }
    atomic_write(report_path, report_to_json(report));
    atomic_write((fs::path(opt.out) / "curves.csv").string(), curves_to_csv(report));

    const auto agg = aggregate_radar(report);
    std::cout << "report written to " << report_path << "\n";
    std::cout << summary_table({{"evaluated", report}});
    std::cout << "radar: transparency " << agg.transparency << ", acc-faithfulness "
              << agg.acc_faithfulness << ", expl-faithfulness " << agg.expl_faithfulness
              << ", robustness " << agg.expl_robustness << ", diversity " << agg.diversity
              << "\n";
    return 0;
}

int cmd_report(const Options& opt, const std::vector<std::string>& inputs) {
    require(!inputs.empty(), "report: no report.json inputs given");
    for (const auto& path : inputs) require_input_file(path);
    fs::create_directories(opt.out);
    const std::string svg_path = (fs::path(opt.out) / "radar.svg").string();
    check_output(svg_path, opt.overwrite);

    std::vector<std::pair<std::string, AggregateReport>> reports;
    for (const auto& path : inputs) {
        std::ifstream in(path);
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        std::string name = fs::path(path).parent_path().filename().string();
        if (name.empty()) name = path;
        reports.emplace_back(name, report_from_json(text));
    }

    std::vector<std::pair<std::string, RadarScores>> entries;
    for (const auto& [name, report] : reports) {
        entries.emplace_back(name, aggregate_radar(report));
    }
    atomic_write(svg_path, radar_svg(entries));
    const std::string table = summary_table(reports);
    atomic_write((fs::path(opt.out) / "summary.txt").string(), table);
    std::cout << table << "radar plot written to " << svg_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"KMEx: prototype-based self-explainable model conversion and evaluation"};
    app.require_subcommand(1);
    Options opt;
    std::vector<std::string> report_inputs;

    auto* train = app.add_subcommand("train-toy", "train a small CNN on synthetic images");
    train->add_option("--out", opt.out, "output directory")->required();
    train->add_option("--seed", opt.seed, "base seed");
    train->add_option("--classes", opt.classes, "number of classes");
    train->add_option("--train-count", opt.train_count, "total training images");
    train->add_option("--test-count", opt.test_count, "total test images");
    train->add_option("--image-size", opt.image_size, "image side length");
    train->add_option("--separation", opt.separation, "class template separation");
    train->add_option("--epochs", opt.epochs, "training epochs");
    train->add_option("--learning-rate", opt.learning_rate, "SGD learning rate");
    train->add_option("--batch-size", opt.batch_size, "SGD batch size");
    train->add_flag("--attributed", opt.attributed,
                    "generate attributed data and write attrs.csv");
    train->add_flag("--overwrite", opt.overwrite, "replace existing outputs");

    auto* embed_cmd = app.add_subcommand("embed", "embed a dataset through the encoder");
    add_model_flags(embed_cmd, opt);
    add_data_flags(embed_cmd, opt);
    embed_cmd->add_option("--out", opt.out, "output directory")->required();
    embed_cmd->add_option("--threads", opt.threads, "worker threads");
    embed_cmd->add_flag("--overwrite", opt.overwrite, "replace existing outputs");

    auto* convert_cmd = app.add_subcommand("convert", "per-class k-means conversion");
    add_model_flags(convert_cmd, opt);
    add_data_flags(convert_cmd, opt);
    add_convert_flags(convert_cmd, opt);
    convert_cmd->add_option("--seed", opt.seed, "conversion seed");
    convert_cmd->add_option("--out", opt.out, "output directory")->required();
    convert_cmd->add_option("--threads", opt.threads, "worker threads");
    convert_cmd->add_flag("--overwrite", opt.overwrite, "replace existing outputs");

    auto* eval_cmd = app.add_subcommand("evaluate", "run the full metric suite");
    add_model_flags(eval_cmd, opt);
    add_data_flags(eval_cmd, opt);
    eval_cmd->add_option("--test-data", opt.test_data, "test images (IDX)")->required();
    eval_cmd->add_option("--test-labels", opt.test_labels, "test labels (IDX)")->required();
    eval_cmd->add_option("--attrs", opt.attrs, "attribute annotations (attrs.csv)");
    add_convert_flags(eval_cmd, opt);
    eval_cmd->add_option("--seed", opt.seed, "seed or comma list of seeds");
    eval_cmd->add_option("--ro-steps", opt.ro_steps, "masking steps per curve");
    eval_cmd->add_option("--eval-images", opt.eval_images, "images for explanation metrics");
    eval_cmd->add_option("--threads", opt.threads, "worker threads");
    eval_cmd->add_option("--out", opt.out, "output directory")->required();
    eval_cmd->add_flag("--overwrite", opt.overwrite, "replace an existing report.json");

    auto* report_cmd = app.add_subcommand("report", "radar plot + summary for reports");
    report_cmd->add_option("reports", report_inputs, "report.json files")->required();
    report_cmd->add_option("--out", opt.out, "output directory")->required();
    report_cmd->add_flag("--overwrite", opt.overwrite, "replace existing outputs");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train_toy(opt);
        if (embed_cmd->parsed()) return cmd_embed(opt);
        if (convert_cmd->parsed()) return cmd_convert(opt);
        if (eval_cmd->parsed()) return cmd_evaluate(opt);
        if (report_cmd->parsed()) return cmd_report(opt, report_inputs);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
