#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace caag::corpus {

// Special token ids are fixed across every file and checkpoint.
inline constexpr int kBos = 0;
inline constexpr int kEos = 1;
inline constexpr int kPad = 2;
inline constexpr int kUnk = 3;
inline constexpr std::size_t kNumSpecials = 4;

inline constexpr std::size_t kMaxLen = 16;  // caption tokens including EOS

/// Lowercase, split on whitespace runs, strip trailing '.' and ',' from each
/// token, truncate to max_len-1 tokens (one slot reserved for EOS).
std::vector<std::string> tokenize(const std::string& text,
                                  std::size_t max_len = kMaxLen);

/// Token <-> id maps with fixed specials. Non-special ids are assigned by
/// count (desc) then lexicographic, which makes builds deterministic.
class Vocabulary {
public:
  Vocabulary();

  static Vocabulary build(const std::vector<std::vector<std::string>>& captions,
                          int min_count = 5);

  int id(const std::string& token) const;  // kUnk when absent
  const std::string& token(int id) const;
  std::size_t size() const { return id_to_token_.size(); }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;
  /// Decoded text with specials dropped.
  std::string to_text(const std::vector<int>& ids) const;

  /// FNV-1a over the ordered token list; used to pair checkpoints with the
  /// vocabulary they were trained against.
  std::uint64_t hash() const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;

  void push(const std::string& tok);
};

/// Drop BOS/EOS/PAD (metric inputs are bare word sequences).
std::vector<int> strip_specials(const std::vector<int>& ids);

}  // namespace caag::corpus
