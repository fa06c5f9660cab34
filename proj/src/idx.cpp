#include "kmex/idx.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace kmex {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open \"", path, "\"");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

std::uint32_t read_u32_be(const std::string& bytes, std::size_t offset,
                          const std::string& path) {
    require(offset + 4 <= bytes.size(), "\"", path, "\": truncated at offset ", offset,
            " (need 4 bytes, file has ", bytes.size(), ")");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

struct IdxHeader {
    int element_type = 0;  // 0x08 ubyte, 0x0D float
    std::vector<std::uint32_t> dims;
    std::size_t payload_offset = 0;
};

IdxHeader parse_idx_header(const std::string& bytes, const std::string& path) {
    const std::uint32_t magic = read_u32_be(bytes, 0, path);
    require((magic >> 16) == 0, "\"", path, "\": bad IDX magic 0x", hex64(magic),
            " at offset 0 (first two bytes must be zero)");
    IdxHeader header;
    header.element_type = static_cast<int>((magic >> 8) & 0xff);
    require(header.element_type == 0x08 || header.element_type == 0x0D, "\"", path,
            "\": unsupported IDX element type 0x", hex64(header.element_type),
            " (expected 0x08 ubyte or 0x0d float)");
    const int ndims = static_cast<int>(magic & 0xff);
    require(ndims >= 1 && ndims <= 4, "\"", path, "\": unsupported IDX rank ", ndims);
    for (int d = 0; d < ndims; ++d) {
        header.dims.push_back(read_u32_be(bytes, 4 + 4 * static_cast<std::size_t>(d), path));
    }
    header.payload_offset = 4 + 4 * header.dims.size();
    return header;
}

void check_payload(const std::string& bytes, const IdxHeader& header,
                   const std::string& path) {
    std::size_t count = 1;
    for (auto d : header.dims) count *= d;
    const std::size_t element = header.element_type == 0x08 ? 1 : 4;
    const std::size_t expected = header.payload_offset + count * element;
    require(bytes.size() == expected, "\"", path, "\": expected ", expected,
            " bytes, file has ", bytes.size());
}

float read_element(const std::string& bytes, const IdxHeader& header, std::size_t index) {
    if (header.element_type == 0x08) {
        const auto v = static_cast<unsigned char>(bytes[header.payload_offset + index]);
        return static_cast<float>(v) / 255.0f;
    }
    const std::size_t at = header.payload_offset + index * 4;
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + at);
    const std::uint32_t raw = (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
                              (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
    float value;
    std::memcpy(&value, &raw, 4);
    return value;
}

void append_u32_be(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), "cannot write \"", path, "\"");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), "write failed for \"", path, "\"");
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t limit) {
    const std::string ibytes = read_file(images_path);
    const std::string lbytes = read_file(labels_path);
    const IdxHeader ih = parse_idx_header(ibytes, images_path);
    const IdxHeader lh = parse_idx_header(lbytes, labels_path);
    require(ih.dims.size() == 3 || ih.dims.size() == 4, "\"", images_path,
            "\": image file must be rank 3 or 4, got rank ", ih.dims.size());
    require(lh.dims.size() == 1, "\"", labels_path, "\": label file must be rank 1");
    check_payload(ibytes, ih, images_path);
    check_payload(lbytes, lh, labels_path);

    const std::size_t n = ih.dims[0];
    require(n == lh.dims[0], "image count ", n, " does not match label count ",
            lh.dims[0]);
    require(n > 0, "\"", images_path, "\": no samples");

    TensorShape shape;
    if (ih.dims.size() == 3) {
        shape = {1, static_cast<int>(ih.dims[1]), static_cast<int>(ih.dims[2])};
    } else {
        shape = {static_cast<int>(ih.dims[1]), static_cast<int>(ih.dims[2]),
                 static_cast<int>(ih.dims[3])};
    }

    std::size_t keep = n;
    if (limit > 0) {
        require(limit <= n, "limit ", limit, " exceeds sample count ", n);
        keep = limit;
    }

    Dataset data;
    const std::size_t per_image = static_cast<std::size_t>(shape.size());
    int max_label = 0;
    for (std::size_t i = 0; i < keep; ++i) {
        Tensorf img(shape);
        for (std::size_t j = 0; j < per_image; ++j) {
            img.data[static_cast<Eigen::Index>(j)] = read_element(ibytes, ih, i * per_image + j);
        }
        data.images.push_back(std::move(img));
        const float raw = read_element(lbytes, lh, i) * (lh.element_type == 0x08 ? 255.0f : 1.0f);
        const int label = static_cast<int>(raw + 0.5f) + 1;
        data.labels.push_back(label);
        max_label = std::max(max_label, label);
    }
    data.num_classes = max_label;
    validate(data);
    return data;
}

void write_idx_images(const std::string& path, const std::vector<Tensorf>& images) {
    require(!images.empty(), "write_idx_images: no images");
    const TensorShape shape = images[0].shape;
    std::string bytes;
    if (shape.channels == 1) {
        append_u32_be(bytes, 0x00000D03);
        append_u32_be(bytes, static_cast<std::uint32_t>(images.size()));
        append_u32_be(bytes, static_cast<std::uint32_t>(shape.height));
        append_u32_be(bytes, static_cast<std::uint32_t>(shape.width));
    } else {
        append_u32_be(bytes, 0x00000D04);
        append_u32_be(bytes, static_cast<std::uint32_t>(images.size()));
        append_u32_be(bytes, static_cast<std::uint32_t>(shape.channels));
        append_u32_be(bytes, static_cast<std::uint32_t>(shape.height));
        append_u32_be(bytes, static_cast<std::uint32_t>(shape.width));
    }
    for (const auto& img : images) {
        require(img.shape == shape, "write_idx_images: inconsistent image shapes");
        for (Eigen::Index j = 0; j < img.data.size(); ++j) {
            std::uint32_t raw;
            const float v = img.data[j];
            std::memcpy(&raw, &v, 4);
            append_u32_be(bytes, raw);
        }
    }
    write_file(path, bytes);
}

void write_idx_labels(const std::string& path, const std::vector<int>& labels) {
    require(!labels.empty(), "write_idx_labels: no labels");
    std::string bytes;
    append_u32_be(bytes, 0x00000801);
    append_u32_be(bytes, static_cast<std::uint32_t>(labels.size()));
    for (int label : labels) {
        require(label >= 1 && label <= 256, "write_idx_labels: label ", label,
                " cannot be stored as unsigned byte");
        bytes.push_back(static_cast<char>(label - 1));
    }
    write_file(path, bytes);
}

}  // namespace kmex
