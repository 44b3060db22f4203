#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <string>

#include "dlgfa/data.hpp"

using namespace dlgfa;

namespace {

std::string temp_path(const std::string& name) {
    return std::string("/tmp/dlgfa_data_test_") + name;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

// 59 features over 29 groups, shaped like a motion-capture joint layout.
LongitudinalDataset surrogate_mocap(std::size_t n, std::size_t T, std::uint64_t seed) {
    LongitudinalDataset ds;
    ds.group_spec.dims.assign(29, 2);
    ds.group_spec.dims[0] = 3;
    for (std::size_t g = 0; g < 29; ++g) ds.group_spec.names.push_back("joint" + std::to_string(g));
    const std::size_t d = ds.group_spec.total_dim();
    ds.sequences = Tensor::zeros({n, T, d});
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (double& v : ds.sequences.data()) v = dist(rng);
    for (std::size_t i = 0; i < n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "walk%03zu", i);
        ds.subject_ids.push_back(buf);
    }
    for (std::size_t t = 0; t < T; ++t) ds.time_index.push_back(std::to_string(t + 1));
    ds.validate();
    return ds;
}

}  // namespace

TEST_CASE("noiseless one-bar images put the bar on the diagonal row") {
    LongitudinalDataset ds = generate_one_bar(3, 4, 0.0, 1);
    CHECK(ds.count() == 3);
    CHECK(ds.timesteps() == 4);
    CHECK(ds.dim() == 16);
    CHECK(ds.group_spec.group_count() == 4);
    CHECK(ds.group_spec.names[0] == "row0");
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t t = 0; t < 4; ++t) {
            const double* img = ds.sequences.data().data() + (i * 4 + t) * 16;
            for (std::size_t r = 0; r < 4; ++r) {
                for (std::size_t c = 0; c < 4; ++c) {
                    CHECK(img[r * 4 + c] == (r == t ? 1.0 : 0.0));
                }
            }
        }
    }
}

TEST_CASE("noisy one-bar images stay near the clean pattern") {
    LongitudinalDataset ds = generate_one_bar(50, 8, 0.05, 9);
    double max_dev = 0.0;
    for (std::size_t i = 0; i < ds.count(); ++i) {
        for (std::size_t t = 0; t < 8; ++t) {
            const double* img = ds.sequences.data().data() + (i * 8 + t) * 64;
            for (std::size_t r = 0; r < 8; ++r) {
                for (std::size_t c = 0; c < 8; ++c) {
                    const double clean = (r == t) ? 1.0 : 0.0;
                    max_dev = std::max(max_dev, std::abs(img[r * 8 + c] - clean));
                }
            }
        }
    }
    CHECK(max_dev > 0.0);
    CHECK(max_dev < 0.5);  // 10 sigma
}

TEST_CASE("replicate mode repeats one image over the sequence") {
    LongitudinalDataset ds = generate_one_bar(20, 4, 0.0, 7, OneBarMode::ReplicateT, 6);
    CHECK(ds.timesteps() == 6);
    std::set<std::size_t> bars_seen;
    for (std::size_t i = 0; i < ds.count(); ++i) {
        const double* first = ds.sequences.data().data() + i * 6 * 16;
        for (std::size_t t = 1; t < 6; ++t) {
            const double* img = ds.sequences.data().data() + (i * 6 + t) * 16;
            CHECK(std::equal(first, first + 16, img));
        }
        for (std::size_t r = 0; r < 4; ++r) {
            if (first[r * 4] == 1.0) bars_seen.insert(r);
        }
    }
    CHECK(bars_seen.size() > 1);  // the bar row varies across sequences
}

TEST_CASE("one-bar generation is deterministic in the seed") {
    LongitudinalDataset a = generate_one_bar(5, 4, 0.05, 11);
    LongitudinalDataset b = generate_one_bar(5, 4, 0.05, 11);
    LongitudinalDataset c = generate_one_bar(5, 4, 0.05, 12);
    CHECK(a.sequences.data() == b.sequences.data());
    CHECK(a.sequences.data() != c.sequences.data());
    CHECK(a.subject_ids == b.subject_ids);
}

TEST_CASE("generator input validation") {
    CHECK_THROWS_AS(generate_one_bar(1, 1, 0.0, 0), ContractError);
    CHECK_THROWS_AS(generate_one_bar(1, 4, -0.1, 0), ContractError);
    CHECK_THROWS_AS(generate_one_bar(1, 4, 0.0, 0, OneBarMode::ReplicateT, 0), ContractError);
}

TEST_CASE("split produces the documented sizes") {
    LongitudinalDataset ds = generate_one_bar(2000, 3, 0.0, 1);
    SplitSpec spec;
    auto [tr, va, te] = split_dataset(ds, spec);
    CHECK(tr.count() == 1600);
    CHECK(va.count() == 200);
    CHECK(te.count() == 200);

    LongitudinalDataset small = generate_one_bar(10, 3, 0.0, 1);
    auto [tr2, va2, te2] = split_dataset(small, spec);
    CHECK(tr2.count() == 8);
    CHECK(va2.count() == 1);
    CHECK(te2.count() == 1);
}

TEST_CASE("split is a disjoint partition of the subjects") {
    LongitudinalDataset ds = generate_one_bar(40, 3, 0.01, 2);
    SplitSpec spec;
    spec.seed = 5;
    auto [tr, va, te] = split_dataset(ds, spec);
    std::set<std::string> all;
    for (const auto& part : {tr, va, te}) {
        for (const std::string& s : part.subject_ids) CHECK(all.insert(s).second);
    }
    CHECK(all.size() == 40);
    // Deterministic in the seed, different for another seed.
    auto [tr2, va2, te2] = split_dataset(ds, spec);
    (void)va2;
    (void)te2;
    CHECK(tr.subject_ids == tr2.subject_ids);
    spec.seed = 6;
    auto [tr3, va3, te3] = split_dataset(ds, spec);
    (void)va3;
    (void)te3;
    CHECK(tr.subject_ids != tr3.subject_ids);
}

TEST_CASE("split rejects bad fractions") {
    LongitudinalDataset ds = generate_one_bar(10, 3, 0.0, 1);
    SplitSpec spec;
    spec.train = 0.9;
    CHECK_THROWS_AS(split_dataset(ds, spec), ContractError);
    spec = SplitSpec{};
    spec.train = 1.0;
    spec.val = 0.0;
    spec.test = 0.0;
    CHECK_THROWS_AS(split_dataset(ds, spec), ContractError);
}

TEST_CASE("csv round trip is exact") {
    LongitudinalDataset ds = generate_one_bar(6, 4, 0.05, 13);
    const std::string path = temp_path("roundtrip.csv");
    save_wide_csv(ds, path);
    LongitudinalDataset back = load_wide_csv(path);
    CHECK(back.sequences.data() == ds.sequences.data());
    CHECK(back.subject_ids == ds.subject_ids);
    CHECK(back.time_index == ds.time_index);
    CHECK(back.group_spec.dims == ds.group_spec.dims);
    CHECK(back.group_spec.names == ds.group_spec.names);
}

TEST_CASE("csv loading canonicalizes row order") {
    const std::string path = temp_path("shuffled.csv");
    write_file(path,
               "subject,t,a.0,b.0,b.1\n"
               "s2,2,5,6,7\n"
               "s1,1,1,2,3\n"
               "s2,1,4,4,4\n"
               "s1,2,8,9,10\n");
    LongitudinalDataset ds = load_wide_csv(path);
    CHECK(ds.subject_ids == std::vector<std::string>{"s1", "s2"});
    CHECK(ds.time_index == std::vector<std::string>{"1", "2"});
    CHECK(ds.group_spec.names == std::vector<std::string>{"a", "b"});
    CHECK(ds.group_spec.dims == std::vector<std::size_t>{1, 2});
    CHECK(ds.sequences.data() == std::vector<double>{1, 2, 3, 8, 9, 10, 4, 4, 4, 5, 6, 7});
}

TEST_CASE("csv parse errors carry line numbers") {
    const std::string path = temp_path("bad.csv");
    write_file(path,
               "subject,t,a.0\n"
               "s1,1,0.5\n"
               "s1,2,oops\n");
    try {
        load_wide_csv(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }

    write_file(path, "subject,t,a.0\ns1,1\n");
    CHECK_THROWS_AS(load_wide_csv(path), ParseError);  // wrong cell count

    write_file(path, "subject,time,a.0\ns1,1,0\n");
    CHECK_THROWS_AS(load_wide_csv(path), ParseError);  // bad header

    write_file(path, "subject,t,a.0,b.0,a.1\ns1,1,0,0,0\n");
    CHECK_THROWS_AS(load_wide_csv(path), ParseError);  // split group columns

    write_file(path, "subject,t,a.0\ns1,1,0\ns1,1,1\n");
    CHECK_THROWS_AS(load_wide_csv(path), ParseError);  // duplicate timestep

    write_file(path, "subject,t,a.0\ns1,1,0\ns2,2,0\n");
    CHECK_THROWS_AS(load_wide_csv(path), ParseError);  // inconsistent time grids
}

TEST_CASE("mocap-shaped surrogate survives a csv round trip") {
    LongitudinalDataset ds = surrogate_mocap(8, 5, 21);
    CHECK(ds.dim() == 59);
    CHECK(ds.group_spec.group_count() == 29);
    const std::string path = temp_path("mocap.csv");
    save_wide_csv(ds, path);
    LongitudinalDataset back = load_wide_csv(path);
    CHECK(back.sequences.data() == ds.sequences.data());
    CHECK(back.group_spec.dims == ds.group_spec.dims);
    CHECK(back.subject_ids == ds.subject_ids);
}

TEST_CASE("batches partition the dataset") {
    LongitudinalDataset ds = generate_one_bar(11, 3, 0.05, 31);
    std::vector<Tensor> batches = make_batches(ds, 4, 99);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].shape() == std::vector<std::size_t>{3, 4, 9});
    CHECK(batches[2].shape() == std::vector<std::size_t>{3, 3, 9});

    // Every sequence appears exactly once across the batches.
    std::multiset<std::vector<double>> seen;
    for (const Tensor& b : batches) {
        const std::size_t B = b.shape()[1], d = b.shape()[2];
        for (std::size_t i = 0; i < B; ++i) {
            std::vector<double> seq;
            for (std::size_t t = 0; t < 3; ++t) {
                for (std::size_t c = 0; c < d; ++c) seq.push_back(b.data()[(t * B + i) * d + c]);
            }
            seen.insert(std::move(seq));
        }
    }
    std::multiset<std::vector<double>> want;
    for (std::size_t i = 0; i < 11; ++i) {
        std::vector<double> seq(ds.sequences.data().begin() + i * 27,
                                ds.sequences.data().begin() + (i + 1) * 27);
        want.insert(std::move(seq));
    }
    CHECK(seen == want);
}

TEST_CASE("batch shuffling is seed-driven") {
    LongitudinalDataset ds = generate_one_bar(16, 3, 0.05, 41);
    std::vector<Tensor> a = make_batches(ds, 8, 1);
    std::vector<Tensor> b = make_batches(ds, 8, 1);
    std::vector<Tensor> c = make_batches(ds, 8, 2);
    CHECK(a[0].data() == b[0].data());
    CHECK(a[0].data() != c[0].data());
    CHECK_THROWS_AS(make_batches(ds, 0, 1), ContractError);
}

TEST_CASE("subset picks sequences by index") {
    LongitudinalDataset ds = generate_one_bar(5, 3, 0.0, 51);
    LongitudinalDataset sub = subset(ds, {4, 0});
    CHECK(sub.count() == 2);
    CHECK(sub.subject_ids[0] == ds.subject_ids[4]);
    CHECK(std::equal(sub.sequences.data().begin(), sub.sequences.data().begin() + 27,
                     ds.sequences.data().begin() + 4 * 27));
    CHECK_THROWS_AS(subset(ds, {5}), ContractError);
}

TEST_CASE("dataset validation") {
    LongitudinalDataset ds = generate_one_bar(3, 3, 0.0, 1);
    ds.subject_ids.pop_back();
    CHECK_THROWS_AS(ds.validate(), ContractError);
    ds = generate_one_bar(3, 3, 0.0, 1);
    ds.sequences.data()[0] = std::nan("");
    CHECK_THROWS_AS(ds.validate(), NumericError);
    ds = generate_one_bar(3, 3, 0.0, 1);
    ds.group_spec.dims[0] = 7;
    CHECK_THROWS_AS(ds.validate(), ContractError);
}
