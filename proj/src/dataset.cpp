#include "aer/dataset.hpp"

#include "aer/common.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace aer {

namespace {

constexpr char kStage[] = "dataset";

[[noreturn]] void fail(const std::string& message) { throw StageError(kStage, message); }

}  // namespace

Dataset Dataset::from(Eigen::MatrixXd features, std::vector<int> labels) {
    if (features.rows() != static_cast<Eigen::Index>(labels.size()))
        fail("feature rows and label count differ");
    if (features.rows() == 0) fail("empty dataset");
    if (!features.allFinite()) fail("features contain NaN or infinity");
    Dataset d;
    for (int y : labels) {
        if (y == 1)
            ++d.minority_;
        else if (y == 0)
            ++d.majority_;
        else
            fail("label outside {0,1}");
    }
    d.features = std::move(features);
    d.labels = std::move(labels);
    return d;
}

Dataset Dataset::select_rows(const std::vector<int>& rows) const {
    Eigen::MatrixXd f(static_cast<Eigen::Index>(rows.size()), features.cols());
    std::vector<int> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        int r = rows[i];
        if (r < 0 || r >= row_count()) fail("row index out of range");
        f.row(static_cast<Eigen::Index>(i)) = features.row(r);
        y[i] = labels[static_cast<std::size_t>(r)];
    }
    return Dataset::from(std::move(f), std::move(y));
}

std::vector<int> Dataset::minority_indices() const {
    std::vector<int> idx;
    for (int i = 0; i < row_count(); ++i)
        if (labels[static_cast<std::size_t>(i)] == 1) idx.push_back(i);
    return idx;
}

std::vector<int> Dataset::majority_indices() const {
    std::vector<int> idx;
    for (int i = 0; i < row_count(); ++i)
        if (labels[static_cast<std::size_t>(i)] == 0) idx.push_back(i);
    return idx;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& features) {
    Standardizer s;
    s.mean = features.colwise().mean().transpose();
    Eigen::MatrixXd centered = features.rowwise() - s.mean.transpose();
    s.stddev = (centered.array().square().colwise().sum() /
                std::max<double>(1.0, static_cast<double>(features.rows())))
                   .sqrt()
                   .matrix()
                   .transpose();
    for (Eigen::Index j = 0; j < s.stddev.size(); ++j)
        if (s.stddev[j] < 1e-12) s.stddev[j] = 1.0;
    return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& features) const {
    if (features.cols() != mean.size()) fail("standardizer dimension mismatch");
    Eigen::MatrixXd out = features.rowwise() - mean.transpose();
    out.array().rowwise() /= stddev.transpose().array();
    return out;
}

namespace {

// Splits one CSV record stream into fields, honoring quoted fields with
// embedded commas, quotes, and newlines. Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields, int& line_no) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int c;
    while ((c = in.get()) != EOF) {
        any = true;
        char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    field += '"';
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') ++line_no;
                field += ch;
            }
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == ',') {
            fields.push_back(field);
            field.clear();
        } else if (ch == '\r') {
            // swallow; newline handling below
        } else if (ch == '\n') {
            ++line_no;
            fields.push_back(field);
            return true;
        } else {
            field += ch;
        }
    }
    if (!any) return false;
    fields.push_back(field);
    return true;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& text, double& out) {
    std::string t = trim(text);
    if (t.empty()) return false;
    const char* begin = t.data();
    const char* end = begin + t.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace

Dataset load_csv(const std::string& path, const LabelColumn& label_column,
                 const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open file: " + path);

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header;
    {
        std::vector<std::string> fields;
        int line_no = 1;
        bool first = true;
        while (read_record(in, fields, line_no)) {
            if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // blank line
            if (first && options.has_header) {
                header = fields;
                first = false;
                continue;
            }
            first = false;
            rows.push_back(fields);
        }
    }
    if (rows.empty()) fail("empty dataset in " + path);

    const std::size_t width = rows.front().size();
    int label_idx = -1;
    if (std::holds_alternative<int>(label_column)) {
        label_idx = std::get<int>(label_column);
        if (label_idx < 0) label_idx = static_cast<int>(width) + label_idx;
    } else {
        const std::string& name = std::get<std::string>(label_column);
        for (std::size_t j = 0; j < header.size(); ++j)
            if (trim(header[j]) == name) label_idx = static_cast<int>(j);
        if (label_idx < 0) {
            // fall back to a numeric index given as text
            int parsed = 0;
            auto [p, ec] = std::from_chars(name.data(), name.data() + name.size(), parsed);
            if (ec == std::errc() && p == name.data() + name.size())
                label_idx = parsed < 0 ? static_cast<int>(width) + parsed : parsed;
        }
        if (label_idx < 0) fail("label column '" + name + "' not found");
    }
    if (label_idx < 0 || label_idx >= static_cast<int>(width))
        fail("label column index out of range");

    const std::size_t n_features = width - 1;
    Eigen::MatrixXd features(static_cast<Eigen::Index>(rows.size()),
                             static_cast<Eigen::Index>(n_features));
    std::vector<std::string> raw_labels(rows.size());

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& fields = rows[i];
        if (fields.size() != width) {
            fail("row " + std::to_string(i + 1) + " has " + std::to_string(fields.size()) +
                 " fields, expected " + std::to_string(width));
        }
        Eigen::Index col = 0;
        for (std::size_t j = 0; j < width; ++j) {
            if (static_cast<int>(j) == label_idx) {
                raw_labels[i] = trim(fields[j]);
                continue;
            }
            double v = 0.0;
            if (!parse_double(fields[j], v)) {
                std::string col_name = j < header.size() ? trim(header[j])
                                                         : "column " + std::to_string(j + 1);
                fail("non-numeric feature cell at row " + std::to_string(i + 1) + ", " +
                     col_name + ": '" + trim(fields[j]) + "'");
            }
            if (!std::isfinite(v))
                fail("non-finite feature value at row " + std::to_string(i + 1));
            features(static_cast<Eigen::Index>(i), col++) = v;
        }
    }

    // Map the two raw label values onto {0,1}: rarer value -> 1, ties resolve
    // to the lexicographically smaller raw value as minority.
    std::map<std::string, Eigen::Index> counts;
    for (const auto& s : raw_labels) ++counts[s];
    if (counts.size() != 2)
        fail("label column must hold exactly two distinct values, found " +
             std::to_string(counts.size()));
    auto it = counts.begin();
    auto [first_value, first_count] = *it++;
    auto [second_value, second_count] = *it;
    // counts is ordered, so first_value < second_value lexicographically
    std::string minority_value =
        (first_count == second_count) ? first_value
                                      : (first_count < second_count ? first_value : second_value);

    std::vector<int> labels(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        labels[i] = raw_labels[i] == minority_value ? 1 : 0;

    return Dataset::from(std::move(features), std::move(labels));
}

void save_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot open output file: " + path);
    for (Eigen::Index j = 0; j < data.feature_count(); ++j) out << "f" << j << ",";
    out << "label\n";
    char buf[64];
    for (Eigen::Index i = 0; i < data.row_count(); ++i) {
        for (Eigen::Index j = 0; j < data.feature_count(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", data.features(i, j));
            out << buf << ",";
        }
        out << data.labels[static_cast<std::size_t>(i)] << "\n";
    }
    if (!out) fail("write failed: " + path);
}

namespace {

// Largest-remainder apportionment of `count` items over the three fractions.
std::array<int, 3> largest_remainder(int count, const std::array<double, 3>& fracs) {
    std::array<int, 3> base{};
    std::array<double, 3> rema{};
    int assigned = 0;
    for (int s = 0; s < 3; ++s) {
        double quota = fracs[static_cast<std::size_t>(s)] * count;
        base[static_cast<std::size_t>(s)] = static_cast<int>(std::floor(quota));
        rema[static_cast<std::size_t>(s)] = quota - std::floor(quota);
        assigned += base[static_cast<std::size_t>(s)];
    }
    int leftover = count - assigned;
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return rema[static_cast<std::size_t>(a)] > rema[static_cast<std::size_t>(b)];
    });
    for (int k = 0; k < leftover; ++k) ++base[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
    return base;
}

}  // namespace

SplitResult stratified_split(const Dataset& data, const SplitSpec& spec) {
    if (spec.train_frac <= 0 || spec.val_frac <= 0 || spec.test_frac <= 0)
        fail("split fractions must be positive");
    if (std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) > 1e-9)
        fail("split fractions must sum to 1");
    if (data.minority_count() < 3 || data.majority_count() < 3)
        fail("each class needs at least 3 instances to split three ways");

    std::array<double, 3> fracs{spec.train_frac, spec.val_frac, spec.test_frac};
    std::mt19937_64 rng(derive_seed(spec.seed, "stratified-split"));
    std::array<std::vector<int>, 3> split_rows;

    for (int cls : {0, 1}) {
        std::vector<int> idx = cls == 0 ? data.majority_indices() : data.minority_indices();
        std::shuffle(idx.begin(), idx.end(), rng);
        auto sizes = largest_remainder(static_cast<int>(idx.size()), fracs);
        std::size_t pos = 0;
        for (int s = 0; s < 3; ++s) {
            for (int k = 0; k < sizes[static_cast<std::size_t>(s)]; ++k)
                split_rows[static_cast<std::size_t>(s)].push_back(idx[pos++]);
        }
    }
    for (auto& rows : split_rows) std::sort(rows.begin(), rows.end());

    return SplitResult{data.select_rows(split_rows[0]), data.select_rows(split_rows[1]),
                       data.select_rows(split_rows[2])};
}

Dataset generate_gmm_data(const SyntheticSpec& spec) {
    if (spec.total_samples < 2) fail("total_samples must be at least 2");
    if (spec.imbalance_ratio <= 0) fail("imbalance_ratio must be positive");
    if (spec.centers_per_class < 1) fail("centers_per_class must be at least 1");
    if (spec.n_features < 1) fail("n_features must be at least 1");
    if (spec.n_informative < 1 || spec.n_informative > spec.n_features)
        fail("n_informative must be in [1, n_features]");

    const int minority = static_cast<int>(
        std::floor(spec.total_samples / (spec.imbalance_ratio + 1.0)));
    const int majority = spec.total_samples - minority;
    if (minority < 1 || majority < 1) fail("infeasible sample counts for the given ratio");

    std::mt19937_64 rng(derive_seed(spec.seed, "generate-gmm-data"));
    std::uniform_real_distribution<double> center_dist(-5.0, 5.0);
    std::normal_distribution<double> unit_normal(0.0, 1.0);

    // class 0 centers first, then class 1, each centers_per_class x n_informative
    std::array<Eigen::MatrixXd, 2> centers;
    for (int cls = 0; cls < 2; ++cls) {
        centers[static_cast<std::size_t>(cls)] =
            Eigen::MatrixXd(spec.centers_per_class, spec.n_informative);
        for (int c = 0; c < spec.centers_per_class; ++c)
            for (int j = 0; j < spec.n_informative; ++j)
                centers[static_cast<std::size_t>(cls)](c, j) = center_dist(rng);
    }

    Eigen::MatrixXd features(spec.total_samples, spec.n_features);
    std::vector<int> labels(static_cast<std::size_t>(spec.total_samples));
    std::uniform_int_distribution<int> pick_center(0, spec.centers_per_class - 1);

    auto emit = [&](int row, int cls) {
        labels[static_cast<std::size_t>(row)] = cls;
        int c = pick_center(rng);
        for (int j = 0; j < spec.n_informative; ++j)
            features(row, j) = centers[static_cast<std::size_t>(cls)](c, j) + unit_normal(rng);
        for (int j = spec.n_informative; j < spec.n_features; ++j)
            features(row, j) = unit_normal(rng);
    };

    int row = 0;
    for (int i = 0; i < majority; ++i) emit(row++, 0);
    for (int i = 0; i < minority; ++i) emit(row++, 1);

    return Dataset::from(std::move(features), std::move(labels));
}

}  // namespace aer
