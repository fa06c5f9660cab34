#include "kmex/kmx_io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace kmex {

namespace {

constexpr std::uint64_t kFormatVersion = 1;

void append_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f32_le(std::string& out, float v) {
    std::uint32_t raw;
    std::memcpy(&raw, &v, 4);
    append_u32_le(out, raw);
}

std::uint64_t read_u64_le(const std::string& bytes, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | static_cast<unsigned char>(bytes[at + i]);
    }
    return v;
}

std::uint32_t read_u32_le(const std::string& bytes, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
        v = (v << 8) | static_cast<unsigned char>(bytes[at + i]);
    }
    return v;
}

float read_f32_le(const std::string& bytes, std::size_t at) {
    const std::uint32_t raw = read_u32_le(bytes, at);
    float v;
    std::memcpy(&v, &raw, 4);
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open \"", path, "\"");
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

void atomic_write(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "cannot write \"", tmp, "\"");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        require(out.good(), "write failed for \"", tmp, "\"");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    require(!ec, "cannot rename \"", tmp, "\" to \"", path, "\": ", ec.message());
}

void save_embeddings(const std::string& path, const Embeddings& emb) {
    validate(emb);
    std::string bytes;
    bytes.reserve(28 + static_cast<std::size_t>(emb.matrix.size()) * 4);
    bytes += "KMEX";
    append_u64_le(bytes, kFormatVersion);
    append_u64_le(bytes, static_cast<std::uint64_t>(emb.matrix.rows()));
    append_u64_le(bytes, static_cast<std::uint64_t>(emb.matrix.cols()));
    for (Eigen::Index r = 0; r < emb.matrix.rows(); ++r) {
        for (Eigen::Index c = 0; c < emb.matrix.cols(); ++c) {
            append_f32_le(bytes, emb.matrix(r, c));
        }
    }
    atomic_write(path, bytes);
}

Embeddings load_embeddings(const std::string& path) {
    const std::string bytes = read_file(path);
    require(bytes.size() >= 28, "\"", path, "\": too short for an embedding header (",
            bytes.size(), " bytes, need 28)");
    require(bytes.compare(0, 4, "KMEX") == 0, "\"", path, "\": bad magic, expected KMEX");
    const std::uint64_t version = read_u64_le(bytes, 4);
    require(version == kFormatVersion, "\"", path, "\": unsupported version ", version);
    const std::uint64_t n = read_u64_le(bytes, 12);
    const std::uint64_t d = read_u64_le(bytes, 20);
    const std::size_t expected = 28 + n * d * 4;
    require(bytes.size() == expected, "\"", path, "\": expected ", expected,
            " bytes for ", n, "x", d, " floats, file has ", bytes.size());
    Embeddings emb;
    emb.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::size_t at = 28;
    for (Eigen::Index r = 0; r < emb.matrix.rows(); ++r) {
        for (Eigen::Index c = 0; c < emb.matrix.cols(); ++c, at += 4) {
            emb.matrix(r, c) = read_f32_le(bytes, at);
        }
    }
    emb.sample_index.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) emb.sample_index[i] = static_cast<std::uint32_t>(i);
    return emb;
}

void save_labels_kmx(const std::string& path, const std::vector<int>& labels) {
    std::string bytes;
    bytes += "KMXL";
    append_u64_le(bytes, kFormatVersion);
    append_u64_le(bytes, labels.size());
    for (int label : labels) {
        require(label >= 1, "labels: label ", label, " must be >= 1");
        append_u32_le(bytes, static_cast<std::uint32_t>(label));
    }
    atomic_write(path, bytes);
}

std::vector<int> load_labels_kmx(const std::string& path) {
    const std::string bytes = read_file(path);
    require(bytes.size() >= 20, "\"", path, "\": too short for a label header");
    require(bytes.compare(0, 4, "KMXL") == 0, "\"", path, "\": bad magic, expected KMXL");
    const std::uint64_t version = read_u64_le(bytes, 4);
    require(version == kFormatVersion, "\"", path, "\": unsupported version ", version);
    const std::uint64_t n = read_u64_le(bytes, 12);
    const std::size_t expected = 20 + n * 4;
    require(bytes.size() == expected, "\"", path, "\": expected ", expected,
            " bytes for ", n, " labels, file has ", bytes.size());
    std::vector<int> labels(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(read_u32_le(bytes, 20 + i * 4));
    }
    return labels;
}

void save_embeddings_csv(const std::string& path, const Embeddings& emb) {
    validate(emb);
    std::ostringstream os;
    char buffer[64];
    for (Eigen::Index r = 0; r < emb.matrix.rows(); ++r) {
        for (Eigen::Index c = 0; c < emb.matrix.cols(); ++c) {
            std::snprintf(buffer, sizeof(buffer), "%.9g",
                          static_cast<double>(emb.matrix(r, c)));
            if (c) os << ',';
            os << buffer;
        }
        os << '\n';
    }
    atomic_write(path, os.str());
}

Embeddings load_embeddings_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open \"", path, "\"");
    std::vector<std::vector<float>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<float> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stof(cell));
            } catch (const std::exception&) {
                fail("\"", path, "\": invalid float \"", cell, "\" at row ", rows.size());
            }
        }
        require(rows.empty() || row.size() == rows[0].size(), "\"", path,
                "\": row ", rows.size(), " has ", row.size(), " columns, expected ",
                rows.empty() ? 0 : rows[0].size());
        rows.push_back(std::move(row));
    }
    Embeddings emb;
    emb.matrix.resize(static_cast<Eigen::Index>(rows.size()),
                      rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            emb.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    emb.sample_index.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        emb.sample_index[i] = static_cast<std::uint32_t>(i);
    }
    return emb;
}

void save_attributes_csv(const std::string& path, const AttributeTable& table) {
    require(!table.names.empty(), "attributes: no attribute names");
    require(table.values.cols() == static_cast<Eigen::Index>(table.names.size()),
            "attributes: ", table.names.size(), " names for ", table.values.cols(),
            " columns");
    std::ostringstream os;
    for (std::size_t i = 0; i < table.names.size(); ++i) {
        if (i) os << ',';
        os << table.names[i];
    }
    os << '\n';
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
        for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
            const int v = table.values(r, c);
            require(v == 0 || v == 1, "attributes: value ", v, " at row ", r,
                    " is not binary");
            if (c) os << ',';
            os << v;
        }
        os << '\n';
    }
    atomic_write(path, os.str());
}

AttributeTable load_attributes_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open \"", path, "\"");
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "\"", path, "\": empty file");
    AttributeTable table;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) table.names.push_back(cell);
    }
    require(!table.names.empty(), "\"", path, "\": no attribute names in header");
    std::vector<std::vector<int>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<int> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            require(cell == "0" || cell == "1", "\"", path, "\": value \"", cell,
                    "\" at row ", rows.size(), " is not 0 or 1");
            row.push_back(cell == "1" ? 1 : 0);
        }
        require(row.size() == table.names.size(), "\"", path, "\": row ", rows.size(),
                " has ", row.size(), " values, expected ", table.names.size());
        rows.push_back(std::move(row));
    }
    table.values.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(table.names.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                rows[r][c];
        }
    }
    return table;
}

}  // namespace kmex
