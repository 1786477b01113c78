#include "caag/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include <json.hpp>

#include "caag/tensor.hpp"

namespace caag::corpus {

std::vector<std::string> tokenize(const std::string& text, std::size_t max_len) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && (cur.back() == '.' || cur.back() == ','))
      cur.pop_back();
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      flush();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  flush();
  if (max_len > 0 && out.size() > max_len - 1) out.resize(max_len - 1);
  return out;
}

Vocabulary::Vocabulary() {
  push("<bos>");
  push("<eos>");
  push("<pad>");
  push("<unk>");
}

void Vocabulary::push(const std::string& tok) {
  token_to_id_.emplace(tok, static_cast<int>(id_to_token_.size()));
  id_to_token_.push_back(tok);
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& captions,
                             int min_count) {
  std::map<std::string, int> counts;
  for (const auto& cap : captions)
    for (const auto& tok : cap) counts[tok] += 1;

  std::vector<std::pair<std::string, int>> kept;
  for (const auto& [tok, n] : counts)
    if (n >= min_count) kept.emplace_back(tok, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  for (const auto& [tok, n] : kept) v.push(tok);
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    throw Error("vocab: id " + std::to_string(id) + " out of range (size " +
                std::to_string(id_to_token_.size()) + ")");
  return id_to_token_[id];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

std::string Vocabulary::to_text(const std::vector<int>& ids) const {
  std::string out;
  for (int i : ids) {
    if (i == kBos || i == kEos || i == kPad) continue;
    if (!out.empty()) out += ' ';
    out += token(i);
  }
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& tok : id_to_token_) {
    for (char c : tok) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  }
  return h;
}

void Vocabulary::save(const std::string& path) const {
  nlohmann::json j;
  j["tokens"] = id_to_token_;
  j["hash"] = hash();
  std::ofstream os(path);
  if (!os) throw Error("vocab: cannot open '" + path + "' for writing");
  os << j.dump(2) << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("vocab: cannot open '" + path + "'");
  nlohmann::json j;
  is >> j;
  auto tokens = j.at("tokens").get<std::vector<std::string>>();
  if (tokens.size() < kNumSpecials)
    throw Error("vocab: file '" + path + "' has fewer than 4 tokens");
  Vocabulary v;
  for (std::size_t i = kNumSpecials; i < tokens.size(); ++i) v.push(tokens[i]);
  return v;
}

std::vector<int> strip_specials(const std::vector<int>& ids) {
  std::vector<int> out;
  out.reserve(ids.size());
  for (int i : ids)
    if (i != kBos && i != kEos && i != kPad) out.push_back(i);
  return out;
}

}  // namespace caag::corpus
