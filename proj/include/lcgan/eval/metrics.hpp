#pragma once

// Classification metrics, label preservation, image grids and CSV summaries.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcgan/data/corpus.hpp"
#include "lcgan/models/networks.hpp"

namespace lcgan::eval {

struct EvalReport {
  std::vector<double> per_class_accuracy;  // NaN-free: classes absent from the test set report 0
  std::vector<std::size_t> class_totals;
  double overall_accuracy = 0.0;
  double macro_accuracy = 0.0;  // mean over classes present in the test set
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::optional<double> label_preservation_rate;
  nlohmann::json metadata = nlohmann::json::object();  // seed, config_hash, checkpoint_step, ...

  bool operator==(const EvalReport&) const = default;
};

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);

/// Tallies predictions against labels for K classes.
EvalReport evaluate_predictions(const std::vector<int>& labels, const std::vector<int>& predictions, int classes);

/// Argmax predictions in fixed-size batches (ties to the lower index).
std::vector<int> predict(const models::Classifier<float>& f, const data::Corpus& corpus, std::size_t batch = 256);

/// Throws InvalidArgument on an empty corpus or a class-count mismatch.
EvalReport evaluate_classifier(const models::Classifier<float>& f, const data::Corpus& test);

/// Fraction of items with argmax f(G(x, y)) == y, overall and per class
/// (classes without items report 0).
struct Preservation {
  double overall = 0.0;
  std::vector<double> per_class;
  std::vector<std::size_t> class_totals;
};

Preservation label_preservation(const models::Classifier<float>& f, const models::Generator<float>& g,
                                const data::Corpus& corpus, std::size_t batch = 64);
double label_preservation_rate(const models::Classifier<float>& f, const models::Generator<float>& g,
                               const data::Corpus& corpus);

/// Writes rows of equally shaped images (values in [-1, 1]) as one PNG with
/// `pad` pixels of white between and around tiles. Captions are stored as PNG
/// text chunks. Canvas: rows*h + (rows+1)*pad high, cols*w + (cols+1)*pad wide.
void render_image_grid(const std::vector<std::vector<std::vector<float>>>& rows, ImageShape tile,
                       const std::vector<std::string>& captions, const std::filesystem::path& path, int pad = 2);

struct SummaryRow {
  std::string method;
  double reduction_rate = 0.0;
  int cls = 0;
  double accuracy = 0.0;
  std::uint64_t seed = 0;
};

/// CSV with header method,reduction_rate,class,accuracy,seed.
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path);

}  // namespace lcgan::eval
