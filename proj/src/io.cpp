// Copyright (C) 2026 The rfcmg Authors
// SPDX-License-Identifier: Apache-2.0

#include "rfcmg/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "rfcmg/common.hpp"

namespace rfcmg::io {

namespace {

constexpr char kTensorMagic[4] = {'R', 'F', 'C', 'T'};
constexpr char kArchiveMagic[4] = {'R', 'F', 'C', 'K'};

template <typename U>
U to_little(U v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        U out;
        auto* src = reinterpret_cast<const unsigned char*>(&v);
        auto* dst = reinterpret_cast<unsigned char*>(&out);
        for (std::size_t i = 0; i < sizeof(U); ++i) dst[i] = src[sizeof(U) - 1 - i];
        return out;
    }
}

class Writer {
public:
    template <typename U>
    void put(U v) {
        v = to_little(v);
        const auto* p = reinterpret_cast<const unsigned char*>(&v);
        buf_.insert(buf_.end(), p, p + sizeof(U));
    }
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        buf_.insert(buf_.end(), p, p + n);
    }
    void tensor(const TensorData& t) {
        require(t.values.size() == t.element_count(), "tensor payload does not match shape");
        put<std::uint32_t>(kDtypeFloat32);
        put<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) put<std::uint64_t>(d);
        for (float f : t.values) put<std::uint32_t>(std::bit_cast<std::uint32_t>(f));
    }
    void save(const std::filesystem::path& path) const {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
        out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
        if (!out) throw std::runtime_error("write failed for " + path.string());
    }

private:
    std::vector<unsigned char> buf_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : path_(path.string()) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + path_);
        buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    template <typename U>
    U get() {
        need(sizeof(U));
        U v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(U));
        pos_ += sizeof(U);
        return to_little(v);
    }
    std::string str(std::uint64_t n) {
        need(n);
        std::string s(buf_.data() + pos_, buf_.data() + pos_ + n);
        pos_ += n;
        return s;
    }
    void magic(const char (&m)[4]) {
        need(4);
        if (std::memcmp(buf_.data() + pos_, m, 4) != 0) fail("bad magic bytes");
        pos_ += 4;
    }
    TensorData tensor() {
        const auto dtype = get<std::uint32_t>();
        if (dtype != kDtypeFloat32) fail("unsupported dtype code " + std::to_string(dtype));
        const auto rank = get<std::uint32_t>();
        if (rank > 8) fail("implausible rank " + std::to_string(rank));
        TensorData t;
        std::uint64_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            t.shape.push_back(get<std::uint64_t>());
            count *= t.shape.back();
        }
        if (count > remaining() / 4) fail("payload shorter than shape header");
        t.values.resize(count);
        for (auto& f : t.values) f = std::bit_cast<float>(get<std::uint32_t>());
        return t;
    }
    void expect_end() const {
        if (pos_ != buf_.size()) fail("trailing bytes after payload");
    }
    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    void need(std::uint64_t n) const {
        if (n > remaining()) fail("truncated file");
    }
    [[noreturn]] void fail(const std::string& why) const {
        throw CorruptFileError(path_ + ": " + why);
    }

    std::string path_;
    std::vector<char> buf_;
    std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t TensorData::element_count() const {
    std::uint64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

const TensorData& Archive::get(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t.tensor;
    }
    throw CorruptFileError("archive has no tensor named " + name);
}

void write_tensor_file(const std::filesystem::path& path, const TensorData& t) {
    Writer w;
    w.bytes(kTensorMagic, 4);
    w.put<std::uint32_t>(kContainerVersion);
    w.tensor(t);
    w.save(path);
}

TensorData read_tensor_file(const std::filesystem::path& path) {
    Reader r(path);
    r.magic(kTensorMagic);
    if (r.get<std::uint32_t>() != kContainerVersion) throw CorruptFileError("unsupported version");
    TensorData t = r.tensor();
    r.expect_end();
    return t;
}

void write_archive(const std::filesystem::path& path, const Archive& a) {
    Writer w;
    w.bytes(kArchiveMagic, 4);
    w.put<std::uint32_t>(kContainerVersion);
    const std::string header = a.header.dump();
    w.put<std::uint64_t>(header.size());
    w.bytes(header.data(), header.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(a.tensors.size()));
    for (const auto& nt : a.tensors) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(nt.name.size()));
        w.bytes(nt.name.data(), nt.name.size());
        w.tensor(nt.tensor);
    }
    w.save(path);
}

Archive read_archive(const std::filesystem::path& path) {
    Reader r(path);
    r.magic(kArchiveMagic);
    if (r.get<std::uint32_t>() != kContainerVersion) throw CorruptFileError("unsupported version");
    Archive a;
    const auto json_len = r.get<std::uint64_t>();
    try {
        a.header = nlohmann::json::parse(r.str(json_len));
    } catch (const nlohmann::json::parse_error& e) {
        throw CorruptFileError(path.string() + ": header is not valid JSON");
    }
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
        NamedTensor nt;
        nt.name = r.str(r.get<std::uint32_t>());
        nt.tensor = r.tensor();
        a.tensors.push_back(std::move(nt));
    }
    r.expect_end();
    return a;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error&) {
        throw CorruptFileError(path.string() + ": not valid JSON");
    }
}

std::string bytes_digest(std::span<const unsigned char> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes_digest(buf);
}

}  // namespace rfcmg::io
