#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "lossprobe/error.hpp"
#include "lossprobe/toymodel.hpp"

namespace lossprobe::toy {

namespace {

constexpr const char* kModelFormat = "lossprobe-ngram";
constexpr int kModelVersion = 1;

}  // namespace

NGramModel::NGramModel(std::size_t order, std::uint32_t vocab_size, double alpha)
    : order_(order), vocab_size_(vocab_size), alpha_(alpha) {
  if (order_ < 1) fail(Errc::invalid_argument, "n-gram order must be >= 1");
  if (vocab_size_ == 0) fail(Errc::invalid_argument, "vocab_size must be positive");
  if (!(std::isfinite(alpha_) && alpha_ > 0.0)) {
    fail(Errc::invalid_argument, "smoothing alpha must be positive");
  }
}

std::string NGramModel::name() const {
  return fmt::format("ngram(order={},alpha={},V={})", order_, alpha_, vocab_size_);
}

void NGramModel::add_sequence(std::span<const TokenId> tokens) {
  Context ctx(order_, bos());
  for (TokenId t : tokens) {
    if (t >= vocab_size_) {
      fail(Errc::token_out_of_vocab, fmt::format("token {} >= vocab_size {}", t, vocab_size_));
    }
    auto& counts = contexts_[ctx];
    ++counts.total;
    ++counts.next[t];
    ctx.erase(ctx.begin());
    ctx.push_back(t);
  }
}

double NGramModel::probability(std::span<const TokenId> context, TokenId next) const {
  if (context.size() != order_) {
    fail(Errc::invalid_argument,
         fmt::format("context has {} tokens, model order is {}", context.size(), order_));
  }
  const double denom_extra = alpha_ * vocab_size_;
  const auto it = contexts_.find(Context(context.begin(), context.end()));
  if (it == contexts_.end()) return 1.0 / vocab_size_;
  const auto hit = it->second.next.find(next);
  const double c = hit == it->second.next.end() ? 0.0 : static_cast<double>(hit->second);
  return (c + alpha_) / (static_cast<double>(it->second.total) + denom_extra);
}

std::vector<double> NGramModel::distribution(std::span<const TokenId> context) const {
  std::vector<double> p(vocab_size_);
  for (TokenId v = 0; v < vocab_size_; ++v) p[v] = probability(context, v);
  return p;
}

std::vector<double> NGramModel::token_nll(std::span<const TokenId> tokens) const {
  std::vector<double> out;
  out.reserve(tokens.size());
  Context ctx(order_, bos());
  for (TokenId t : tokens) {
    out.push_back(-std::log(probability(ctx, t)));
    ctx.erase(ctx.begin());
    ctx.push_back(t);
  }
  return out;
}

nlohmann::json NGramModel::to_json() const {
  nlohmann::json contexts = nlohmann::json::array();
  for (const auto& [ctx, counts] : contexts_) {
    nlohmann::json next = nlohmann::json::array();
    for (const auto& [tok, c] : counts.next) next.push_back({tok, c});
    contexts.push_back({ctx, next});
  }
  return {{"format", kModelFormat},  {"version", kModelVersion}, {"order", order_},
          {"vocab_size", vocab_size_}, {"alpha", alpha_},          {"contexts", contexts}};
}

NGramModel NGramModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat) {
      fail(Errc::parse_error, "not an n-gram model file");
    }
    if (j.at("version").get<int>() != kModelVersion) {
      fail(Errc::parse_error,
           fmt::format("unsupported model version {}", j.at("version").get<int>()));
    }
    NGramModel model(j.at("order").get<std::size_t>(), j.at("vocab_size").get<std::uint32_t>(),
                     j.at("alpha").get<double>());
    for (const auto& entry : j.at("contexts")) {
      auto ctx = entry.at(0).get<Context>();
      if (ctx.size() != model.order_) fail(Errc::parse_error, "context length != order");
      for (TokenId t : ctx) {
        if (t > model.bos()) fail(Errc::parse_error, "context token out of range");
      }
      ContextCounts counts;
      for (const auto& pair : entry.at(1)) {
        const auto tok = pair.at(0).get<TokenId>();
        const auto c = pair.at(1).get<std::uint64_t>();
        if (tok >= model.vocab_size_) fail(Errc::parse_error, "predicted token out of range");
        counts.next[tok] += c;
        counts.total += c;
      }
      model.contexts_.emplace(std::move(ctx), std::move(counts));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse_error, fmt::format("bad n-gram model: {}", e.what()));
  }
}

void NGramModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) fail(Errc::io_error, fmt::format("cannot write '{}'", path.string()));
  out << to_json().dump() << '\n';
  if (!out) fail(Errc::io_error, fmt::format("write to '{}' failed", path.string()));
}

NGramModel NGramModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, fmt::format("cannot open '{}'", path.string()));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse_error, fmt::format("'{}': {}", path.string(), e.what()));
  }
  return from_json(j);
}

NGramModel train_ngram(std::span<const TokenSequence> corpus, std::size_t order, double alpha) {
  if (corpus.empty()) fail(Errc::invalid_argument, "cannot train on an empty corpus");
  std::uint32_t vocab = 0;
  for (const auto& s : corpus) vocab = std::max(vocab, s.vocab_size());
  NGramModel model(order, vocab, alpha);
  for (const auto& s : corpus) model.add_sequence(s.tokens());
  return model;
}

LossTrace score_ngram(const NGramModel& model, const TokenSequence& seq) {
  if (seq.vocab_size() > model.vocab_size()) {
    fail(Errc::vocab_mismatch, fmt::format("sequence vocab {} exceeds model vocab {}",
                                           seq.vocab_size(), model.vocab_size()));
  }
  return {model.token_nll(seq.tokens()), seq.id(), model.name()};
}

}  // namespace lossprobe::toy
