#include "midas/encoder.h"

#include <fstream>

#include "json.hpp"
#include "midas/error.h"
#include "midas/text.h"

namespace midas {

using nlohmann::json;

std::vector<double> Encoder::encode(std::string_view input) const {
  std::vector<double> out(width());
  encode(prepare(input), out);
  return out;
}

std::vector<std::size_t> Encoder::backward(const EncodedInput&, std::span<const double>,
                                           std::span<double>) const {
  return {};
}

NgramEncoder::NgramEncoder(std::vector<int> orders, std::size_t dim)
    : orders_(std::move(orders)), dim_(dim) {
  if (dim_ == 0) throw UsageError("encoder width must be positive");
  if (orders_.empty()) throw UsageError("encoder needs at least one n-gram order");
  for (int n : orders_) {
    if (n < 1) throw UsageError("n-gram orders must be positive");
  }
}

NgramEncoder NgramEncoder::fit(const std::vector<std::string>& inputs, std::vector<int> orders,
                               std::size_t dim, std::mt19937_64& rng, double scale) {
  NgramEncoder enc(std::move(orders), dim);
  enc.extend(inputs, rng, scale);
  return enc;
}

std::vector<std::string> NgramEncoder::ngrams(std::string_view input) const {
  auto tokens = split_tokens(input);
  std::vector<std::string> out;
  for (int order : orders_) {
    std::size_t n = static_cast<std::size_t>(order);
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      out.push_back(join_tokens(tokens, i, i + n));
    }
  }
  return out;
}

void NgramEncoder::extend(const std::vector<std::string>& inputs, std::mt19937_64& rng,
                          double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (const auto& input : inputs) {
    for (auto& g : ngrams(input)) {
      if (index_.count(g)) continue;
      index_.emplace(g, vocab_.size());
      vocab_.push_back(std::move(g));
      for (std::size_t k = 0; k < dim_; ++k) embeddings_.push_back(dist(rng));
    }
  }
}

void NgramEncoder::set_table(std::vector<std::string> vocab, std::vector<double> embeddings) {
  if (embeddings.size() != vocab.size() * dim_) {
    throw ModelError("embedding table has " + std::to_string(embeddings.size()) +
                     " values, expected " + std::to_string(vocab.size() * dim_));
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (!index.emplace(vocab[i], i).second) throw ModelError("duplicate n-gram '" + vocab[i] + "'");
  }
  vocab_ = std::move(vocab);
  index_ = std::move(index);
  embeddings_ = std::move(embeddings);
}

EncodedInput NgramEncoder::prepare(std::string_view input) const {
  EncodedInput e;
  for (const auto& g : ngrams(input)) {
    auto it = index_.find(g);
    if (it != index_.end()) e.ids.push_back(it->second);
  }
  return e;
}

void NgramEncoder::encode(const EncodedInput& input, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  if (input.ids.empty()) return;
  for (std::size_t id : input.ids) {
    const double* row = embeddings_.data() + id * dim_;
    for (std::size_t k = 0; k < dim_; ++k) out[k] += row[k];
  }
  double inv = 1.0 / static_cast<double>(input.ids.size());
  for (auto& v : out) v *= inv;
}

std::vector<std::size_t> NgramEncoder::backward(const EncodedInput& input,
                                                std::span<const double> grad_out,
                                                std::span<double> grad) const {
  if (input.ids.empty()) return {};
  double inv = 1.0 / static_cast<double>(input.ids.size());
  for (std::size_t id : input.ids) {
    double* row = grad.data() + id * dim_;
    for (std::size_t k = 0; k < dim_; ++k) row[k] += grad_out[k] * inv;
  }
  return input.ids;
}

std::unique_ptr<Encoder> NgramEncoder::clone() const {
  return std::make_unique<NgramEncoder>(*this);
}

std::string PrecomputedVectors::key_for(std::string_view input) { return hash_hex(input); }

std::shared_ptr<const PrecomputedVectors> PrecomputedVectors::from_map(
    std::unordered_map<std::string, std::vector<double>> by_key, std::size_t dim,
    std::string source) {
  if (dim == 0) throw DataError("precomputed vectors must have positive width");
  for (const auto& [key, v] : by_key) {
    if (v.size() != dim) {
      throw DataError("vector for key " + key + " has width " + std::to_string(v.size()) +
                      ", expected " + std::to_string(dim));
    }
  }
  auto out = std::make_shared<PrecomputedVectors>();
  out->dim_ = dim;
  out->source_ = std::move(source);
  out->table_ = std::move(by_key);
  return out;
}

std::shared_ptr<const PrecomputedVectors> PrecomputedVectors::load(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vector file " + path.string());
  std::unordered_map<std::string, std::vector<double>> table;
  std::size_t dim = 0;
  std::string line;
  std::size_t lineno = 0;
  const std::string source = path.string();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      std::string key;
      if (j.contains("key")) {
        key = j.at("key").get<std::string>();
      } else {
        key = key_for(j.at("input").get<std::string>());
      }
      auto v = j.at("vector").get<std::vector<double>>();
      if (dim == 0) dim = v.size();
      if (v.empty() || v.size() != dim) {
        throw ParseError(source, lineno, "vector width " + std::to_string(v.size()) +
                                             " differs from " + std::to_string(dim));
      }
      table[key] = std::move(v);
    } catch (const json::exception& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  if (table.empty()) throw DataError(source + ": no vectors");
  return from_map(std::move(table), dim, source);
}

const std::vector<double>* PrecomputedVectors::find(std::string_view input) const {
  auto it = table_.find(key_for(input));
  return it == table_.end() ? nullptr : &it->second;
}

PrecomputedEncoder::PrecomputedEncoder(std::shared_ptr<const PrecomputedVectors> vectors)
    : vectors_(std::move(vectors)) {
  if (!vectors_) throw UsageError("precomputed encoder needs a vector table");
}

EncodedInput PrecomputedEncoder::prepare(std::string_view input) const {
  EncodedInput e;
  if (const auto* v = vectors_->find(input)) {
    e.vector = *v;
  } else {
    e.vector.assign(vectors_->dim(), 0.0);
  }
  return e;
}

void PrecomputedEncoder::encode(const EncodedInput& input, std::span<double> out) const {
  std::copy(input.vector.begin(), input.vector.end(), out.begin());
}

std::unique_ptr<Encoder> PrecomputedEncoder::clone() const {
  return std::make_unique<PrecomputedEncoder>(vectors_);
}

}  // namespace midas
