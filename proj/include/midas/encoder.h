// encoder.h: rendered classifier input -> fixed-width real vector.
//
// Two implementations: a bag of token n-grams with learned embeddings (mean
// pooled, trained jointly with the head), and a lookup table of precomputed
// vectors keyed by a hash of the input, for vectors produced by an external
// model.

#ifndef MIDAS_ENCODER_H_
#define MIDAS_ENCODER_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace midas {

// Input after the encoder's own preprocessing, reusable across epochs.
struct EncodedInput {
  std::vector<std::size_t> ids;  // n-gram rows, repeats kept
  std::vector<double> vector;    // fixed encoders only
};

class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t width() const = 0;

  virtual EncodedInput prepare(std::string_view input) const = 0;
  virtual void encode(const EncodedInput& input, std::span<double> out) const = 0;
  std::vector<double> encode(std::string_view input) const;

  // Trainable parameters as one flat block; empty for fixed encoders.
  virtual std::span<double> parameters() { return {}; }
  virtual std::span<const double> parameters() const { return {}; }

  // Adds d(loss)/d(parameters) into grad given d(loss)/d(output). Returns
  // the parameter rows touched, for sparse updates.
  virtual std::vector<std::size_t> backward(const EncodedInput& input,
                                            std::span<const double> grad_out,
                                            std::span<double> grad) const;

  virtual std::unique_ptr<Encoder> clone() const = 0;
};

class NgramEncoder : public Encoder {
 public:
  NgramEncoder(std::vector<int> orders, std::size_t dim);

  // Builds the vocabulary from inputs (first-seen order) with embeddings
  // drawn uniformly from [-scale, scale].
  static NgramEncoder fit(const std::vector<std::string>& inputs, std::vector<int> orders,
                          std::size_t dim, std::mt19937_64& rng, double scale = 0.1);

  // Adds n-grams not yet in the vocabulary; existing rows are untouched.
  void extend(const std::vector<std::string>& inputs, std::mt19937_64& rng, double scale = 0.1);

  // N-grams of the whitespace tokens of `input`, joined by single spaces.
  std::vector<std::string> ngrams(std::string_view input) const;

  const std::vector<int>& orders() const { return orders_; }
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  const std::vector<double>& embeddings() const { return embeddings_; }
  // Replaces vocabulary and embeddings (vocab.size() * dim values).
  void set_table(std::vector<std::string> vocab, std::vector<double> embeddings);

  std::string kind() const override { return "ngram"; }
  std::size_t width() const override { return dim_; }
  EncodedInput prepare(std::string_view input) const override;
  // Mean of the known n-gram rows; zero when none is known.
  void encode(const EncodedInput& input, std::span<double> out) const override;
  using Encoder::encode;
  std::span<double> parameters() override { return embeddings_; }
  std::span<const double> parameters() const override { return embeddings_; }
  std::vector<std::size_t> backward(const EncodedInput& input, std::span<const double> grad_out,
                                    std::span<double> grad) const override;
  std::unique_ptr<Encoder> clone() const override;

 private:
  std::vector<int> orders_;
  std::size_t dim_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> embeddings_;
};

// JSON lines, one vector per line: {"key": <hash_hex(input)>, "vector": [...]}
// or {"input": <rendered input>, "vector": [...]}. All vectors share one width.
class PrecomputedVectors {
 public:
  static std::shared_ptr<const PrecomputedVectors> load(const std::filesystem::path& path);
  static std::shared_ptr<const PrecomputedVectors> from_map(
      std::unordered_map<std::string, std::vector<double>> by_key, std::size_t dim,
      std::string source = "<memory>");

  static std::string key_for(std::string_view input);

  std::size_t dim() const { return dim_; }
  const std::string& source() const { return source_; }
  std::size_t size() const { return table_.size(); }
  const std::vector<double>* find(std::string_view input) const;

 private:
  std::size_t dim_ = 0;
  std::string source_;
  std::unordered_map<std::string, std::vector<double>> table_;
};

// Inputs missing from the table encode as the zero vector.
class PrecomputedEncoder : public Encoder {
 public:
  explicit PrecomputedEncoder(std::shared_ptr<const PrecomputedVectors> vectors);

  const PrecomputedVectors& vectors() const { return *vectors_; }

  std::string kind() const override { return "precomputed"; }
  std::size_t width() const override { return vectors_->dim(); }
  EncodedInput prepare(std::string_view input) const override;
  void encode(const EncodedInput& input, std::span<double> out) const override;
  using Encoder::encode;
  std::unique_ptr<Encoder> clone() const override;

 private:
  std::shared_ptr<const PrecomputedVectors> vectors_;
};

}  // namespace midas

#endif  // MIDAS_ENCODER_H_
