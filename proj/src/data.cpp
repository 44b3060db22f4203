#include "dlgfa/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace dlgfa {

void LongitudinalDataset::validate() const {
    if (sequences.shape().size() != 3) throw ContractError("dataset: sequences must be N x T x d");
    group_spec.validate();
    if (group_spec.total_dim() != dim()) {
        throw ContractError("dataset: group dims sum to " + std::to_string(group_spec.total_dim()) +
                            " but sequences have d=" + std::to_string(dim()));
    }
    if (subject_ids.size() != count()) throw ContractError("dataset: subject id count mismatch");
    if (time_index.size() != timesteps()) throw ContractError("dataset: time index length mismatch");
    if (!sequences.all_finite()) throw NumericError("dataset: non-finite values");
}

LongitudinalDataset generate_one_bar(std::size_t n, std::size_t size, double noise_sd,
                                     std::uint64_t seed, OneBarMode mode, std::size_t replicate_t) {
    if (size < 2) throw ContractError("generate_one_bar: size must be >= 2");
    if (noise_sd < 0.0) throw ContractError("generate_one_bar: noise_sd must be >= 0");
    const std::size_t d = size * size;
    const std::size_t T = (mode == OneBarMode::RowAsTime) ? size : replicate_t;
    if (T == 0) throw ContractError("generate_one_bar: replicate_t must be >= 1");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> row_pick(0, size - 1);

    LongitudinalDataset ds;
    ds.sequences = Tensor::zeros({n, T, d});
    double* out = ds.sequences.data().data();
    for (std::size_t i = 0; i < n; ++i) {
        if (mode == OneBarMode::RowAsTime) {
            for (std::size_t t = 0; t < T; ++t) {
                double* img = out + (i * T + t) * d;
                for (std::size_t c = 0; c < size; ++c) img[t * size + c] = 1.0;
                if (noise_sd > 0.0) {
                    for (std::size_t k = 0; k < d; ++k) img[k] += noise_sd * noise(rng);
                }
            }
        } else {
            const std::size_t bar = row_pick(rng);
            std::vector<double> img(d, 0.0);
            for (std::size_t c = 0; c < size; ++c) img[bar * size + c] = 1.0;
            if (noise_sd > 0.0) {
                for (std::size_t k = 0; k < d; ++k) img[k] += noise_sd * noise(rng);
            }
            for (std::size_t t = 0; t < T; ++t) {
                std::copy(img.begin(), img.end(), out + (i * T + t) * d);
            }
        }
    }
    ds.group_spec = GroupSpec::uniform(size, size, "row");
    // Zero-padded ids so lexicographic CSV canonicalization preserves order.
    std::size_t width = 1;
    for (std::size_t v = (n > 0 ? n - 1 : 0); v >= 10; v /= 10) ++width;
    for (std::size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "s%0*zu", static_cast<int>(width), i);
        ds.subject_ids.push_back(buf);
    }
    for (std::size_t t = 0; t < T; ++t) ds.time_index.push_back(std::to_string(t + 1));
    ds.validate();
    return ds;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_number(const std::string& s, std::size_t line_no) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
        throw ParseError("line " + std::to_string(line_no) + ": non-numeric cell '" + s + "'");
    }
    return v;
}

}  // namespace

LongitudinalDataset load_wide_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    std::vector<std::string> header = split_line(line);
    if (header.size() < 3 || header[0] != "subject" || header[1] != "t") {
        throw ParseError(path + ": header must start with 'subject,t'");
    }

    // Group columns by the prefix before the first dot; must be contiguous.
    GroupSpec spec;
    for (std::size_t c = 2; c < header.size(); ++c) {
        const std::string& h = header[c];
        const auto dot = h.find('.');
        if (dot == std::string::npos || dot == 0) {
            throw ParseError(path + ": feature column '" + h + "' is not of the form group.feature");
        }
        const std::string group = h.substr(0, dot);
        if (!spec.names.empty() && spec.names.back() == group) {
            spec.dims.back() += 1;
        } else {
            if (std::find(spec.names.begin(), spec.names.end(), group) != spec.names.end()) {
                throw ParseError(path + ": columns of group '" + group + "' are not contiguous");
            }
            spec.names.push_back(group);
            spec.dims.push_back(1);
        }
    }
    const std::size_t d = spec.total_dim();

    struct Row {
        double t;
        std::vector<double> values;
    };
    std::map<std::string, std::vector<Row>> by_subject;  // canonical: sorted by subject id
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " cells, got " +
                             std::to_string(cells.size()));
        }
        Row row;
        row.t = parse_number(cells[1], line_no);
        row.values.reserve(d);
        for (std::size_t c = 2; c < cells.size(); ++c) row.values.push_back(parse_number(cells[c], line_no));
        by_subject[cells[0]].push_back(std::move(row));
    }
    if (by_subject.empty()) throw ParseError(path + ": no data rows");

    // Canonical order: subjects by first appearance, rows by t.
    std::vector<double> ref_times;
    for (auto& [subject, rows] : by_subject) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Row& a, const Row& b) { return a.t < b.t; });
        std::vector<double> times;
        for (const Row& r : rows) times.push_back(r.t);
        for (std::size_t i = 1; i < times.size(); ++i) {
            if (times[i] == times[i - 1]) {
                throw ParseError(path + ": duplicate timestep for subject '" + subject + "'");
            }
        }
        if (ref_times.empty()) {
            ref_times = times;
        } else if (times != ref_times) {
            throw ParseError(path + ": subject '" + subject + "' has a different timestep set");
        }
    }

    const std::size_t N = by_subject.size(), T = ref_times.size();
    LongitudinalDataset ds;
    ds.group_spec = spec;
    ds.sequences = Tensor::zeros({N, T, d});
    std::size_t i = 0;
    for (const auto& [subject, rows] : by_subject) {
        for (std::size_t t = 0; t < T; ++t) {
            std::copy(rows[t].values.begin(), rows[t].values.end(),
                      ds.sequences.data().begin() + (i * T + t) * d);
        }
        ds.subject_ids.push_back(subject);
        ++i;
    }
    for (double t : ref_times) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", t);
        ds.time_index.push_back(buf);
    }
    ds.validate();
    return ds;
}

void save_wide_csv(const LongitudinalDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << "subject,t";
    for (std::size_t g = 0; g < ds.group_spec.group_count(); ++g) {
        for (std::size_t f = 0; f < ds.group_spec.dims[g]; ++f) {
            out << "," << ds.group_spec.names[g] << "." << f;
        }
    }
    out << "\n";
    char buf[32];
    const std::size_t T = ds.timesteps(), d = ds.dim();
    for (std::size_t i = 0; i < ds.count(); ++i) {
        for (std::size_t t = 0; t < T; ++t) {
            out << ds.subject_ids[i] << "," << ds.time_index[t];
            const double* row = ds.sequences.data().data() + (i * T + t) * d;
            for (std::size_t c = 0; c < d; ++c) {
                std::snprintf(buf, sizeof(buf), "%.17g", row[c]);
                out << "," << buf;
            }
            out << "\n";
        }
    }
    if (!out) throw ParseError("write failed: " + path);
}

LongitudinalDataset subset(const LongitudinalDataset& ds, const std::vector<std::size_t>& idx) {
    const std::size_t T = ds.timesteps(), d = ds.dim();
    LongitudinalDataset out;
    out.group_spec = ds.group_spec;
    out.time_index = ds.time_index;
    out.sequences = Tensor::zeros({idx.size(), T, d});
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= ds.count()) throw ContractError("subset: index out of range");
        std::copy(ds.sequences.data().begin() + idx[k] * T * d,
                  ds.sequences.data().begin() + (idx[k] + 1) * T * d,
                  out.sequences.data().begin() + k * T * d);
        out.subject_ids.push_back(ds.subject_ids[idx[k]]);
    }
    return out;
}

std::tuple<LongitudinalDataset, LongitudinalDataset, LongitudinalDataset>
split_dataset(const LongitudinalDataset& ds, const SplitSpec& spec) {
    ds.validate();
    if (spec.train <= 0.0 || spec.val <= 0.0 || spec.test <= 0.0) {
        throw ContractError("split: fractions must be positive");
    }
    if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
        throw ContractError("split: fractions must sum to 1");
    }
    const std::size_t N = ds.count();
    if (N < 3) throw ContractError("split: need at least 3 sequences");
    const auto n_val = static_cast<std::size_t>(std::llround(spec.val * static_cast<double>(N)));
    const auto n_test = static_cast<std::size_t>(std::llround(spec.test * static_cast<double>(N)));
    if (n_val == 0 || n_test == 0 || n_val + n_test >= N) {
        throw ContractError("split: degenerate partition sizes for N=" + std::to_string(N));
    }
    const std::size_t n_train = N - n_val - n_test;

    std::vector<std::size_t> idx(N);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(spec.seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    std::vector<std::size_t> tr(idx.begin(), idx.begin() + n_train);
    std::vector<std::size_t> va(idx.begin() + n_train, idx.begin() + n_train + n_val);
    std::vector<std::size_t> te(idx.begin() + n_train + n_val, idx.end());
    return {subset(ds, tr), subset(ds, va), subset(ds, te)};
}

std::vector<Tensor> make_batches(const LongitudinalDataset& ds, std::size_t batch_size,
                                 std::uint64_t seed) {
    if (batch_size == 0) throw ContractError("make_batches: batch size must be >= 1");
    const std::size_t N = ds.count(), T = ds.timesteps(), d = ds.dim();
    std::vector<std::size_t> idx(N);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    std::vector<Tensor> batches;
    for (std::size_t start = 0; start < N; start += batch_size) {
        const std::size_t B = std::min(batch_size, N - start);
        Tensor batch = Tensor::zeros({T, B, d});
        for (std::size_t b = 0; b < B; ++b) {
            const std::size_t s = idx[start + b];
            for (std::size_t t = 0; t < T; ++t) {
                std::copy(ds.sequences.data().begin() + (s * T + t) * d,
                          ds.sequences.data().begin() + (s * T + t + 1) * d,
                          batch.data().begin() + (t * B + b) * d);
            }
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

}  // namespace dlgfa
