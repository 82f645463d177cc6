#include "rnnbench/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace rnnbench {

namespace {

constexpr char kSignalMagic[8] = {'R', 'N', 'N', 'S', 'I', 'G', 'B', '1'};

static_assert(std::endian::native == std::endian::little,
              "signal binary i/o assumes a little-endian host");

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

PianoRollDataset load_pianoroll(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  std::string line;
  int line_no = 1;
  if (!std::getline(in, line)) parse_fail(path, 1, "empty file");
  std::istringstream header(line);
  std::string word, version, dim_field;
  header >> word >> version >> dim_field;
  if (word != "pianoroll" || version != "v1" || dim_field.rfind("dim=", 0) != 0)
    parse_fail(path, 1, "expected header 'pianoroll v1 dim=<d>'");
  PianoRollDataset ds;
  try {
    ds.dim = std::stoi(dim_field.substr(4));
  } catch (const std::exception&) {
    parse_fail(path, 1, "bad dim value '" + dim_field.substr(4) + "'");
  }
  if (ds.dim < 1) parse_fail(path, 1, "dim must be >= 1");

  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::vector<int>> seq;
    for (const std::string& step_text : split_on(line, ';')) {
      std::vector<int> step;
      if (step_text != "-") {
        for (const std::string& tok : split_on(step_text, ',')) {
          int idx;
          try {
            size_t pos;
            idx = std::stoi(tok, &pos);
            if (pos != tok.size()) throw std::invalid_argument(tok);
          } catch (const std::exception&) {
            parse_fail(path, line_no, "bad index '" + tok + "'");
          }
          if (idx < 0 || idx >= ds.dim)
            throw DataError(path + ":" + std::to_string(line_no) + ": index " +
                            std::to_string(idx) + " out of range for dim " +
                            std::to_string(ds.dim));
          step.push_back(idx);
        }
        std::sort(step.begin(), step.end());
        if (std::adjacent_find(step.begin(), step.end()) != step.end())
          throw DataError(path + ":" + std::to_string(line_no) + ": duplicate index");
      }
      seq.push_back(std::move(step));
    }
    if (seq.size() < 2)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": sequence must have at least 2 timesteps");
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

void save_pianoroll(const std::string& path, const PianoRollDataset& ds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "pianoroll v1 dim=" << ds.dim << "\n";
  for (const auto& seq : ds.sequences) {
    for (size_t t = 0; t < seq.size(); ++t) {
      if (t) out << ';';
      if (seq[t].empty()) {
        out << '-';
      } else {
        for (size_t j = 0; j < seq[t].size(); ++j) {
          if (j) out << ',';
          out << seq[t][j];
        }
      }
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

SignalDataset load_signal(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open " + path);
  char magic[8] = {};
  probe.read(magic, sizeof(magic));
  bool binary = probe.gcount() == 8 && std::memcmp(magic, kSignalMagic, 8) == 0;
  probe.close();

  SignalDataset ds;
  if (binary) {
    std::ifstream in(path, std::ios::binary);
    in.seekg(8);
    std::uint32_t count = 0, reserved = 0;
    in.read(reinterpret_cast<char*>(&count), 4);
    in.read(reinterpret_cast<char*>(&reserved), 4);
    if (!in) throw ParseError(path + ": truncated binary signal header");
    for (std::uint32_t i = 0; i < count; ++i) {
      std::uint32_t len = 0;
      in.read(reinterpret_cast<char*>(&len), 4);
      if (!in) throw ParseError(path + ": truncated sequence header");
      std::vector<float> buf(len);
      in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(len) * 4);
      if (!in) throw ParseError(path + ": truncated sequence payload");
      ds.sequences.emplace_back(buf.begin(), buf.end());
    }
    return ds;
  }

  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: empty file");
  std::istringstream header(line);
  std::string word, version, count_field;
  header >> word >> version >> count_field;
  if (word != "signal" || version != "v1" || count_field.rfind("count=", 0) != 0)
    parse_fail(path, 1, "expected header 'signal v1 count=<n>'");
  size_t count = 0;
  try {
    count = std::stoul(count_field.substr(6));
  } catch (const std::exception&) {
    parse_fail(path, 1, "bad count value");
  }

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Vector seq;
    std::istringstream vals(line);
    double x;
    while (vals >> x) seq.push_back(x);
    if (!vals.eof()) parse_fail(path, line_no, "bad real value");
    ds.sequences.push_back(std::move(seq));
  }
  if (ds.sequences.size() != count)
    throw ParseError(path + ": header says " + std::to_string(count) +
                     " sequences, file has " + std::to_string(ds.sequences.size()));
  return ds;
}

void save_signal_text(const std::string& path, const SignalDataset& ds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "signal v1 count=" << ds.sequences.size() << "\n";
  char buf[32];
  for (const auto& seq : ds.sequences) {
    for (size_t i = 0; i < seq.size(); ++i) {
      if (i) out << ' ';
      std::snprintf(buf, sizeof(buf), "%.17g", seq[i]);
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

void save_signal_binary(const std::string& path, const SignalDataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kSignalMagic, 8);
  auto count = static_cast<std::uint32_t>(ds.sequences.size());
  std::uint32_t reserved = 0;
  out.write(reinterpret_cast<const char*>(&count), 4);
  out.write(reinterpret_cast<const char*>(&reserved), 4);
  for (const auto& seq : ds.sequences) {
    auto len = static_cast<std::uint32_t>(seq.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    std::vector<float> buf(seq.begin(), seq.end());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()) * 4);
  }
  if (!out) throw IoError("failed writing " + path);
}

Vector binarize_step(const std::vector<int>& active, int dim) {
  Vector out(dim, 0.0);
  for (int idx : active) {
    if (idx < 0 || idx >= dim)
      throw DataError("binarize_step: index " + std::to_string(idx) +
                      " out of range for dim " + std::to_string(dim));
    out[idx] = 1.0;
  }
  return out;
}

SequenceBatchItem pianoroll_item(const PianoRollDataset& ds, int index) {
  if (index < 0 || index >= static_cast<int>(ds.sequences.size()))
    throw DataError("pianoroll_item: sequence index out of range");
  const auto& seq = ds.sequences[index];
  if (seq.size() < 2) throw DataError("pianoroll_item: sequence shorter than 2 steps");
  SequenceBatchItem item;
  item.inputs.reserve(seq.size() - 1);
  item.targets.reserve(seq.size() - 1);
  for (size_t t = 0; t + 1 < seq.size(); ++t) {
    item.inputs.push_back(binarize_step(seq[t], ds.dim));
    item.targets.push_back(binarize_step(seq[t + 1], ds.dim));
  }
  return item;
}

SequenceBatchItem window_signal(const Vector& seq, int in_len, int out_len, int stride) {
  if (in_len < 1 || out_len < 1) throw ParameterError("window_signal: bad window sizes");
  if (stride == 0) stride = out_len;
  if (stride < 1) throw ParameterError("window_signal: stride must be >= 1");
  int len = static_cast<int>(seq.size());
  if (len < in_len + out_len)
    throw DataError("window_signal: sequence of length " + std::to_string(len) +
                    " is shorter than in_len + out_len = " +
                    std::to_string(in_len + out_len));
  int T = (len - in_len - out_len) / stride + 1;
  SequenceBatchItem item;
  item.inputs.reserve(T);
  item.targets.reserve(T);
  for (int t = 0; t < T; ++t) {
    int start = t * stride;
    item.inputs.emplace_back(seq.begin() + start, seq.begin() + start + in_len);
    item.targets.emplace_back(seq.begin() + start + in_len,
                              seq.begin() + start + in_len + out_len);
  }
  return item;
}

PianoRollDataset gen_lag_task(RngStream& rng, int num_seq, int T, int lag, int dim) {
  if (lag < 0) throw ParameterError("gen_lag_task: lag must be >= 0");
  if (T <= lag) throw ParameterError("gen_lag_task: need T > lag");
  if (num_seq < 1 || dim < 1) throw ParameterError("gen_lag_task: bad sizes");
  PianoRollDataset ds;
  ds.dim = dim;
  int period = lag + 1;
  for (int s = 0; s < num_seq; ++s) {
    std::vector<std::vector<int>> seq(T);
    for (int t = 0; t < T; ++t) {
      if (t < period) {
        for (int j = 0; j < dim; ++j)
          if (rng.uniform() < 0.5) seq[t].push_back(j);
      } else {
        seq[t] = seq[t - period];
      }
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

SignalDataset gen_synthetic_signal(RngStream& rng, int num_seq, int len, int num_tones) {
  if (num_seq < 1) throw ParameterError("gen_synthetic_signal: need num_seq >= 1");
  if (len < 30) throw ParameterError("gen_synthetic_signal: need len >= 30");
  if (num_tones < 0) throw ParameterError("gen_synthetic_signal: negative num_tones");

  SignalDataset ds;
  for (int s = 0; s < num_seq; ++s) {
    Vector seq(len, 0.0);
    for (int tone = 0; tone < num_tones; ++tone) {
      double freq = rng.uniform(0.01, 0.2);  // cycles per sample
      double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      double amp = rng.uniform(0.5, 1.5);
      for (int t = 0; t < len; ++t)
        seq[t] += amp * std::sin(2.0 * std::numbers::pi * freq * t + phase);
    }
    double rms = 0.0;
    for (double x : seq) rms += x * x;
    rms = std::sqrt(rms / len);
    double noise_std = num_tones > 0 ? 0.1 * rms : 1.0;
    for (double& x : seq) x += rng.normal(0.0, noise_std);
    ds.sequences.push_back(std::move(seq));
  }

  auto [mean, std] = signal_stats(ds, {});
  normalize_signal(ds, mean, std);
  ds.sample_mean = mean;
  ds.sample_std = std;
  return ds;
}

std::pair<double, double> signal_stats(const SignalDataset& ds,
                                       const std::vector<int>& indices) {
  double sum = 0.0, sum_sq = 0.0;
  long count = 0;
  auto accumulate = [&](const Vector& seq) {
    for (double x : seq) {
      sum += x;
      sum_sq += x * x;
    }
    count += static_cast<long>(seq.size());
  };
  if (indices.empty()) {
    for (const auto& seq : ds.sequences) accumulate(seq);
  } else {
    for (int i : indices) {
      if (i < 0 || i >= static_cast<int>(ds.sequences.size()))
        throw DataError("signal_stats: index out of range");
      accumulate(ds.sequences[i]);
    }
  }
  if (count == 0) throw DataError("signal_stats: no samples");
  double mean = sum / count;
  double var = sum_sq / count - mean * mean;
  return {mean, std::sqrt(std::max(var, 0.0))};
}

void normalize_signal(SignalDataset& ds, double mean, double std) {
  if (std <= 0.0) throw ParameterError("normalize_signal: std must be > 0");
  for (auto& seq : ds.sequences)
    for (double& x : seq) x = (x - mean) / std;
}

Split make_split(int count, std::uint64_t seed, std::array<double, 3> fractions) {
  double sum = fractions[0] + fractions[1] + fractions[2];
  for (double f : fractions)
    if (f <= 0.0) throw ParameterError("make_split: fractions must be positive");
  if (std::abs(sum - 1.0) > 1e-9)
    throw ParameterError("make_split: fractions must sum to 1");
  if (count < 3) throw DataError("make_split: need at least 3 sequences");

  // Largest-remainder apportionment.
  std::array<int, 3> sizes;
  std::array<double, 3> remainders;
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    double quota = fractions[i] * count;
    sizes[i] = static_cast<int>(std::floor(quota));
    remainders[i] = quota - sizes[i];
    assigned += sizes[i];
  }
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainders[a] > remainders[b]; });
  for (int i = 0; assigned < count; ++i, ++assigned) sizes[order[i % 3]] += 1;
  // Nonempty guarantee: steal from the largest bucket.
  for (int i = 0; i < 3; ++i) {
    while (sizes[i] == 0) {
      int largest = 0;
      for (int j = 1; j < 3; ++j)
        if (sizes[j] > sizes[largest]) largest = j;
      sizes[largest] -= 1;
      sizes[i] += 1;
    }
  }

  std::vector<int> indices(count);
  for (int i = 0; i < count; ++i) indices[i] = i;
  RngStream rng(seed);
  for (int i = count - 1; i > 0; --i)
    std::swap(indices[i], indices[rng.uniform_index(i + 1)]);

  Split split;
  split.train.assign(indices.begin(), indices.begin() + sizes[0]);
  split.valid.assign(indices.begin() + sizes[0], indices.begin() + sizes[0] + sizes[1]);
  split.test.assign(indices.begin() + sizes[0] + sizes[1], indices.end());
  return split;
}

}  // namespace rnnbench
