#include "amtl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <unordered_set>

#include "amtl/rng.hpp"

namespace amtl {

// ---------------------------------------------------------------------------
// Sample accessors
// ---------------------------------------------------------------------------

double Sample::label(int task_id) const {
  switch (task_id) {
    case 1: return is_humor;
    case 2: return humor_rating;
    case 3: return controversy;
    case 4: return offense;
    default: throw std::invalid_argument("unknown task id " + std::to_string(task_id) + "; expected 1..4");
  }
}

bool Sample::missing(int task_id) const {
  switch (task_id) {
    case 1: return missing_is_humor;
    case 2: return missing_rating;
    case 3: return missing_controversy;
    case 4: return missing_offense;
    default: throw std::invalid_argument("unknown task id " + std::to_string(task_id) + "; expected 1..4");
  }
}

// ---------------------------------------------------------------------------
// UTF-8 helpers
// ---------------------------------------------------------------------------

namespace {

std::vector<char32_t> utf8_decode(const std::string& s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (c < 0x80) {
      cp = c;
      len = 1;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1F;
      len = 2;
    } else if ((c >> 4) == 0xE) {
      cp = c & 0x0F;
      len = 3;
    } else if ((c >> 3) == 0x1E) {
      cp = c & 0x07;
      len = 4;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const unsigned char cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void utf8_encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Composition for the common Latin base + combining mark pairs; full NFC
// needs the Unicode tables, this covers the accents that actually occur in
// tweet-like text.
char32_t compose_pair(char32_t base, char32_t mark) {
  struct Entry {
    char32_t base, mark, composed;
  };
  static const Entry table[] = {
      {U'a', 0x300, 0xE0}, {U'a', 0x301, 0xE1}, {U'a', 0x302, 0xE2}, {U'a', 0x303, 0xE3}, {U'a', 0x308, 0xE4},
      {U'a', 0x30A, 0xE5}, {U'e', 0x300, 0xE8}, {U'e', 0x301, 0xE9}, {U'e', 0x302, 0xEA}, {U'e', 0x308, 0xEB},
      {U'i', 0x300, 0xEC}, {U'i', 0x301, 0xED}, {U'i', 0x302, 0xEE}, {U'i', 0x308, 0xEF}, {U'o', 0x300, 0xF2},
      {U'o', 0x301, 0xF3}, {U'o', 0x302, 0xF4}, {U'o', 0x303, 0xF5}, {U'o', 0x308, 0xF6}, {U'u', 0x300, 0xF9},
      {U'u', 0x301, 0xFA}, {U'u', 0x302, 0xFB}, {U'u', 0x308, 0xFC}, {U'n', 0x303, 0xF1}, {U'c', 0x327, 0xE7},
      {U'y', 0x301, 0xFD}, {U'y', 0x308, 0xFF}, {U'A', 0x300, 0xC0}, {U'A', 0x301, 0xC1}, {U'A', 0x302, 0xC2},
      {U'A', 0x303, 0xC3}, {U'A', 0x308, 0xC4}, {U'A', 0x30A, 0xC5}, {U'E', 0x300, 0xC8}, {U'E', 0x301, 0xC9},
      {U'E', 0x302, 0xCA}, {U'E', 0x308, 0xCB}, {U'I', 0x300, 0xCC}, {U'I', 0x301, 0xCD}, {U'I', 0x302, 0xCE},
      {U'I', 0x308, 0xCF}, {U'O', 0x300, 0xD2}, {U'O', 0x301, 0xD3}, {U'O', 0x302, 0xD4}, {U'O', 0x303, 0xD5},
      {U'O', 0x308, 0xD6}, {U'U', 0x300, 0xD9}, {U'U', 0x301, 0xDA}, {U'U', 0x302, 0xDB}, {U'U', 0x308, 0xDC},
      {U'N', 0x303, 0xD1}, {U'C', 0x327, 0xC7}, {U'Y', 0x301, 0xDD},
  };
  for (const auto& e : table) {
    if (e.base == base && e.mark == mark) return e.composed;
  }
  return 0;
}

char32_t lower_cp(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;  // Latin-1 uppercase
  return cp;
}

const std::unordered_set<std::string>& emoticons() {
  static const std::unordered_set<std::string> set = {
      ":)",  ":-)", ":(",  ":-(", ":D",  ":-D", ":d",  ":P",  ":-P", ":p",  ";)",  ";-)", ":/",  ":-/",
      ":'(", ":o",  ":O",  "<3",  "</3", ":|",  ":*",  "=)",  "=(",  "xD",  "XD",  "xd",  ":3",  "^^",
      "o.O", "o.o", "-_-", ":-|", ";p",  ";P",  "=D",  "=d",
  };
  return set;
}

bool is_ascii_punct(char c) {
  static const char* punct = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
  return c > 0 && std::strchr(punct, c) != nullptr;
}

bool is_alias_token(const std::string& t) {
  if (t.size() < 3 || t.front() != ':' || t.back() != ':') return false;
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    const char c = t[i];
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
  }
  return true;
}

bool is_protected_token(const std::string& t) {
  return t == "HTTPURL" || t == "@USER" || is_alias_token(t) || emoticons().count(t) > 0;
}

void split_chunk(const std::string& chunk, std::vector<std::string>& out) {
  std::string rest = chunk;
  std::vector<std::string> tail;
  while (!rest.empty()) {
    if (rest.size() == 1 || is_protected_token(rest)) {
      out.push_back(rest);
      rest.clear();
      break;
    }
    if (is_ascii_punct(rest.front())) {
      out.push_back(std::string(1, rest.front()));
      rest.erase(rest.begin());
      continue;
    }
    if (is_ascii_punct(rest.back())) {
      tail.push_back(std::string(1, rest.back()));
      rest.pop_back();
      continue;
    }
    out.push_back(rest);
    rest.clear();
  }
  out.insert(out.end(), tail.rbegin(), tail.rend());
}

std::vector<std::string> whitespace_split(const std::string& s) {
  std::vector<std::string> chunks;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      if (!cur.empty()) chunks.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) chunks.push_back(std::move(cur));
  return chunks;
}

}  // namespace

const std::unordered_map<char32_t, std::string>& emoji_aliases() {
  static const std::unordered_map<char32_t, std::string> table = {
#include "emoji_aliases.inc"
  };
  return table;
}

std::string normalize(const std::string& text) {
  // Compose accents and expand emoji while decoding.
  const std::vector<char32_t> cps = utf8_decode(text);
  std::string expanded;
  expanded.reserve(text.size() + 16);
  const auto& aliases = emoji_aliases();
  for (std::size_t i = 0; i < cps.size(); ++i) {
    char32_t cp = cps[i];
    if (i + 1 < cps.size()) {
      const char32_t composed = compose_pair(cp, cps[i + 1]);
      if (composed) {
        cp = composed;
        ++i;
      }
    }
    auto it = aliases.find(cp);
    if (it != aliases.end()) {
      expanded += " :";
      expanded += it->second;
      expanded += ": ";
    } else if (cp == 0xFE0F || cp == 0xFE0E) {
      // variation selectors carry no text
    } else {
      utf8_encode(cp, expanded);
    }
  }

  static const std::regex url_re(R"((https?://[^\s]+|www\.[^\s]+))", std::regex::icase);
  static const std::regex mention_re(R"(@[A-Za-z0-9_]+)");
  std::string replaced = std::regex_replace(expanded, url_re, " HTTPURL ");
  replaced = std::regex_replace(replaced, mention_re, " @USER ");

  // Lowercase everything except the sentinel tokens, then re-join with
  // single spaces.
  std::string out;
  for (const std::string& chunk : whitespace_split(replaced)) {
    std::string piece;
    std::size_t start = 0;
    if (chunk.rfind("HTTPURL", 0) == 0) {
      piece = "HTTPURL";
      start = piece.size();
    } else if (chunk.rfind("@USER", 0) == 0) {
      piece = "@USER";
      start = piece.size();
    }
    const std::vector<char32_t> chunk_cps = utf8_decode(chunk.substr(start));
    for (char32_t cp : chunk_cps) utf8_encode(lower_cp(cp), piece);
    if (!out.empty()) out.push_back(' ');
    out += piece;
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  for (const std::string& chunk : whitespace_split(text)) split_chunk(chunk, tokens);
  if (tokens.empty()) tokens.push_back(kUnkToken);
  return tokens;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> read_csv_records(std::istream& is) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool saw_field = false;
  int ci;
  while ((ci = is.get()) != std::char_traits<char>::eof()) {
    const char c = static_cast<char>(ci);
    if (in_quotes) {
      if (c == '"') {
        if (is.peek() == '"') {
          field.push_back('"');
          is.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      in_quotes = true;
      saw_field = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      saw_field = true;
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      if (saw_field || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      field.clear();
      record.clear();
      saw_field = false;
    } else {
      field.push_back(c);
      saw_field = true;
    }
  }
  if (in_quotes) throw std::invalid_argument("CSV: unterminated quoted field");
  if (saw_field || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_number(const std::string& raw, const std::string& row_id, const std::string& column) {
  const std::string v = trim(raw);
  double out = 0;
  const char* first = v.data();
  const char* last = v.data() + v.size();
  auto [p, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || p != last) {
    throw std::invalid_argument("CSV row '" + row_id + "': non-numeric value '" + raw + "' in column " + column);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::vector<Sample> parse_csv(std::istream& is, bool has_labels, const std::string& origin) {
  std::vector<std::vector<std::string>> records = read_csv_records(is);
  if (records.empty()) throw std::invalid_argument("CSV '" + origin + "': empty file");

  std::vector<std::string> header = records.front();
  if (!header.empty() && header[0].size() >= 3 && header[0].compare(0, 3, "\xEF\xBB\xBF") == 0) {
    header[0] = header[0].substr(3);  // strip UTF-8 BOM
  }
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = i;

  auto require = [&](const char* name) {
    auto it = col.find(name);
    if (it == col.end()) {
      throw std::invalid_argument("CSV '" + origin + "': missing required column '" + std::string(name) + "'");
    }
    return it->second;
  };
  const std::size_t id_col = require("id");
  const std::size_t text_col = require("text");
  std::size_t humor_col = 0, rating_col = 0, contro_col = 0, offense_col = 0;
  if (has_labels) {
    humor_col = require("is_humor");
    rating_col = require("humor_rating");
    contro_col = require("humor_controversy");
    offense_col = require("offense_rating");
  }

  std::vector<Sample> out;
  out.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size()) {
      throw std::invalid_argument("CSV '" + origin + "': row " + std::to_string(r + 1) + " has " +
                                  std::to_string(rec.size()) + " fields, header has " +
                                  std::to_string(header.size()));
    }
    Sample s;
    s.id = rec[id_col];
    s.text = rec[text_col];
    s.labeled = has_labels;
    if (has_labels) {
      auto read_label = [&](std::size_t idx, const char* name, double& value, bool& missing_flag) {
        const std::string cell = trim(rec[idx]);
        if (cell.empty()) {
          value = 0;  // missing values are replaced with 0
          missing_flag = true;
          return;
        }
        value = parse_number(cell, s.id, name);
        missing_flag = false;
      };
      read_label(humor_col, "is_humor", s.is_humor, s.missing_is_humor);
      read_label(rating_col, "humor_rating", s.humor_rating, s.missing_rating);
      read_label(contro_col, "humor_controversy", s.controversy, s.missing_controversy);
      read_label(offense_col, "offense_rating", s.offense, s.missing_offense);
      if (!s.missing_is_humor && s.is_humor != 0 && s.is_humor != 1) {
        throw std::invalid_argument("CSV row '" + s.id + "': is_humor must be 0 or 1");
      }
      if (!s.missing_controversy && s.controversy != 0 && s.controversy != 1) {
        throw std::invalid_argument("CSV row '" + s.id + "': humor_controversy must be 0 or 1");
      }
      if (!s.missing_rating && (s.humor_rating < 0 || s.humor_rating > 5)) {
        throw std::invalid_argument("CSV row '" + s.id + "': humor_rating outside [0,5]");
      }
      if (!s.missing_offense && (s.offense < 0 || s.offense > 5)) {
        throw std::invalid_argument("CSV row '" + s.id + "': offense_rating outside [0,5]");
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> load_csv(const std::string& path, bool has_labels) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FileNotFoundError("cannot open CSV file '" + path + "'");
  return parse_csv(is, has_labels, path);
}

void write_csv(std::ostream& os, const std::vector<Sample>& samples, bool has_labels) {
  os << "id,text";
  if (has_labels) os << ",is_humor,humor_rating,humor_controversy,offense_rating";
  os << "\n";
  for (const Sample& s : samples) {
    os << csv_quote(s.id) << "," << csv_quote(s.text);
    if (has_labels) {
      os << "," << (s.missing_is_humor ? "" : format_double(s.is_humor));
      os << "," << (s.missing_rating ? "" : format_double(s.humor_rating));
      os << "," << (s.missing_controversy ? "" : format_double(s.controversy));
      os << "," << (s.missing_offense ? "" : format_double(s.offense));
    }
    os << "\n";
  }
}

void save_csv(const std::string& path, const std::vector<Sample>& samples, bool has_labels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_csv(os, samples, has_labels);
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

Vocabulary::Vocabulary() {
  tokens_ = {kPadToken, kUnkToken};
  index_[kPadToken] = kPadId;
  index_[kUnkToken] = kUnkId;
}

Vocabulary Vocabulary::build(const std::vector<Sample>& samples, std::size_t max_size) {
  if (max_size < 2) throw std::invalid_argument("Vocabulary: max size must be at least 2");
  std::unordered_map<std::string, std::size_t> counts;
  for (const Sample& s : samples) {
    for (const std::string& tok : tokenize(normalize(s.text))) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  for (const auto& [tok, count] : ranked) {
    (void)count;
    if (v.tokens_.size() >= max_size) break;
    if (tok == kPadToken || tok == kUnkToken) continue;
    v.index_[tok] = v.tokens_.size();
    v.tokens_.push_back(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& id_ordered_tokens) {
  if (id_ordered_tokens.size() < 2 || id_ordered_tokens[0] != kPadToken || id_ordered_tokens[1] != kUnkToken) {
    throw std::invalid_argument("Vocabulary: token list must start with the padding and unknown tokens");
  }
  Vocabulary v;
  v.tokens_ = id_ordered_tokens;
  v.index_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.index_[v.tokens_[i]] = i;
  return v;
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

std::vector<std::size_t> Vocabulary::encode_tokens(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::size_t> Vocabulary::encode(const std::string& raw_text) const {
  return encode_tokens(tokenize(normalize(raw_text)));
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

DatasetStats compute_stats(const std::vector<Sample>& samples) {
  DatasetStats st;
  st.n_total = samples.size();
  std::vector<double> humor_ratings;
  std::size_t n_contro_labeled = 0, n_contro = 0, n_zero_offense = 0;
  std::vector<double> positive_offense;
  for (const Sample& s : samples) {
    if (!s.missing_is_humor && s.is_humor == 1) {
      ++st.n_humor;
      humor_ratings.push_back(s.humor_rating);
    }
    if (!s.missing_controversy) {
      ++n_contro_labeled;
      if (s.controversy == 1) ++n_contro;
    }
    if (s.offense == 0) ++n_zero_offense;
    if (s.offense > 0) positive_offense.push_back(s.offense);
  }
  if (!humor_ratings.empty()) {
    double sum = 0;
    for (double r : humor_ratings) sum += r;
    const double m = sum / static_cast<double>(humor_ratings.size());
    st.rating_mean = m;
    if (humor_ratings.size() == 1) {
      st.rating_std = 0.0;
    } else {
      double sq = 0;
      for (double r : humor_ratings) sq += (r - m) * (r - m);
      st.rating_std = std::sqrt(sq / static_cast<double>(humor_ratings.size() - 1));
    }
  }
  if (n_contro_labeled > 0) {
    st.pct_controversial = 100.0 * static_cast<double>(n_contro) / static_cast<double>(n_contro_labeled);
  }
  if (st.n_total > 0) {
    st.pct_zero_offense = 100.0 * static_cast<double>(n_zero_offense) / static_cast<double>(st.n_total);
  }
  if (!positive_offense.empty()) {
    std::sort(positive_offense.begin(), positive_offense.end());
    const double h = 0.75 * static_cast<double>(positive_offense.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    const double upper = lo + 1 < positive_offense.size() ? positive_offense[lo + 1] : positive_offense[lo];
    st.offense_p75 = positive_offense[lo] + frac * (upper - positive_offense[lo]);
  }
  return st;
}

std::string format_stats(const DatasetStats& st) {
  std::ostringstream os;
  os << "samples:            " << st.n_total << "\n";
  os << "humorous:           " << st.n_humor << "\n";
  os << "humor rating mean:  " << (st.rating_mean ? std::to_string(*st.rating_mean) : std::string("n/a")) << "\n";
  os << "humor rating std:   " << (st.rating_std ? std::to_string(*st.rating_std) : std::string("n/a")) << "\n";
  os << "controversial %:    " << (st.pct_controversial ? std::to_string(*st.pct_controversial) : std::string("n/a"))
     << "\n";
  os << "zero offense %:     " << st.pct_zero_offense << "\n";
  os << "offense p75 (>0):   " << (st.offense_p75 ? std::to_string(*st.offense_p75) : std::string("n/a")) << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

BatchStream::BatchStream(const std::vector<Sample>& samples, const Vocabulary& vocab, std::size_t batch_size,
                         std::uint64_t seed, std::size_t max_len)
    : batch_size_(batch_size), seed_(seed) {
  if (samples.empty()) throw std::invalid_argument("BatchStream: empty dataset");
  if (batch_size < 1) throw std::invalid_argument("BatchStream: batch size must be >= 1");
  if (max_len < 1) throw std::invalid_argument("BatchStream: max length must be >= 1");
  encoded_.reserve(samples.size());
  for (const Sample& s : samples) {
    std::vector<std::size_t> ids = vocab.encode(s.text);
    if (ids.size() > max_len) ids.resize(max_len);
    encoded_.push_back(std::move(ids));
  }
}

std::vector<Batch> BatchStream::epoch(std::size_t epoch_index) const {
  std::vector<std::size_t> order(encoded_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = seeded_rng(seed_, "batch-epoch-" + std::to_string(epoch_index));
  deterministic_shuffle(order, rng);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size_) {
    const std::size_t end = std::min(order.size(), start + batch_size_);
    Batch b;
    std::size_t batch_max = 1;
    for (std::size_t i = start; i < end; ++i) {
      b.indices.push_back(order[i]);
      batch_max = std::max(batch_max, encoded_[order[i]].size());
    }
    for (std::size_t idx : b.indices) {
      std::vector<std::size_t> ids = encoded_[idx];
      b.lengths.push_back(ids.size());
      ids.resize(batch_max, Vocabulary::kPadId);
      b.tokens.push_back(std::move(ids));
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace amtl
