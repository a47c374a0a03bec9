#ifndef AMTL_DATA_HPP
#define AMTL_DATA_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace amtl {

// Thrown when an input path cannot be opened; the CLI maps this to a
// distinct exit code.
struct FileNotFoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";

// One text with the four task labels. Labels that were empty in the source
// file hold 0 with the matching missing flag set.
struct Sample {
  std::string id;
  std::string text;
  double is_humor = 0;
  double humor_rating = 0;
  double controversy = 0;
  double offense = 0;
  bool missing_is_humor = true;
  bool missing_rating = true;
  bool missing_controversy = true;
  bool missing_offense = true;
  bool labeled = false;

  // task_id: 1 = is_humor, 2 = humor_rating, 3 = controversy, 4 = offense
  double label(int task_id) const;
  bool missing(int task_id) const;
};

// Lossy tweet-style normalization: compose common accents, expand emoji to
// ':name:' aliases from the bundled table, URLs -> HTTPURL, mentions ->
// @USER, lowercase, collapse whitespace. Idempotent.
std::string normalize(const std::string& text);

// Whitespace split with leading/trailing punctuation peeled into their own
// tokens; emoticons, ':name:' aliases, HTTPURL and @USER stay whole. Never
// empty: degenerate input yields the unknown token.
std::vector<std::string> tokenize(const std::string& text);

// Bundled static emoji table, code point -> alias name (without colons).
const std::unordered_map<char32_t, std::string>& emoji_aliases();

std::vector<Sample> parse_csv(std::istream& is, bool has_labels, const std::string& origin);
std::vector<Sample> load_csv(const std::string& path, bool has_labels);
void write_csv(std::ostream& os, const std::vector<Sample>& samples, bool has_labels);
void save_csv(const std::string& path, const std::vector<Sample>& samples, bool has_labels);

// Frequency-ranked token map; id 0 is padding, id 1 unknown. Ties break
// lexicographically so construction is deterministic for a fixed corpus.
class Vocabulary {
 public:
  static constexpr std::size_t kPadId = 0;
  static constexpr std::size_t kUnkId = 1;

  Vocabulary();
  static Vocabulary build(const std::vector<Sample>& samples, std::size_t max_size = 20000);
  static Vocabulary from_tokens(const std::vector<std::string>& id_ordered_tokens);

  std::size_t size() const { return tokens_.size(); }
  std::size_t id(const std::string& token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<std::size_t> encode_tokens(const std::vector<std::string>& tokens) const;
  // normalize + tokenize + lookup
  std::vector<std::size_t> encode(const std::string& raw_text) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct DatasetStats {
  std::size_t n_total = 0;
  std::size_t n_humor = 0;
  std::optional<double> rating_mean;        // over humorous samples
  std::optional<double> rating_std;         // sample std, 0 for a single value
  std::optional<double> pct_controversial;  // over samples with a controversy label
  double pct_zero_offense = 0;              // over all samples
  std::optional<double> offense_p75;        // over strictly positive offense, linear interpolation
};

DatasetStats compute_stats(const std::vector<Sample>& samples);
std::string format_stats(const DatasetStats& stats);

struct Batch {
  std::vector<std::size_t> indices;               // into the source sample list
  std::vector<std::vector<std::size_t>> tokens;   // padded to the batch max length
  std::vector<std::size_t> lengths;               // pre-padding lengths
};

// Pre-encodes the corpus once and deals deterministic shuffled batches per
// epoch; the final partial batch is retained.
class BatchStream {
 public:
  BatchStream(const std::vector<Sample>& samples, const Vocabulary& vocab, std::size_t batch_size,
              std::uint64_t seed, std::size_t max_len = 64);

  std::vector<Batch> epoch(std::size_t epoch_index) const;
  const std::vector<std::vector<std::size_t>>& encoded() const { return encoded_; }
  std::size_t batch_size() const { return batch_size_; }

 private:
  std::vector<std::vector<std::size_t>> encoded_;  // truncated to max_len
  std::size_t batch_size_;
  std::uint64_t seed_;
};

}  // namespace amtl

#endif  // AMTL_DATA_HPP
