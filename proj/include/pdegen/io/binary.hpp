// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pdegen/core/errors.hpp"

namespace pdegen::io {

// Little-endian primitive IO over iostreams; x86 hosts write natively. The
// on-disk formats are specified little-endian, so a big-endian port would
// byte-swap here.
struct Writer {
    std::ofstream out;
    explicit Writer(const std::string& path) : out(path, std::ios::binary) {
        if (!out) throw DataError("cannot open '" + path + "' for writing");
    }
    template <class T>
    void pod(T v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void bytes(const void* p, size_t n) { out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void str(const std::string& s) { bytes(s.data(), s.size()); }
};

struct Reader {
    std::ifstream in;
    std::string path;
    explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw DataError("cannot open '" + p + "' for reading");
    }
    template <class T>
    T pod() {
        T v{};
        in.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!in) throw DataError("unexpected end of file in '" + path + "' at offset " +
                                 std::to_string(static_cast<long long>(in.tellg())));
        return v;
    }
    void bytes(void* p, size_t n) {
        in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in) throw DataError("unexpected end of file in '" + path + "'");
    }
    int64_t offset() { return static_cast<int64_t>(in.tellg()); }
};

// Write-to-temp then rename; readers never observe partial files.
template <class F>
void atomic_write(const std::string& path, F fill) {
    const std::string tmp = path + ".tmp";
    {
        Writer w(tmp);
        fill(w);
        w.out.flush();
        if (!w.out) throw DataError("write failed for '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace pdegen::io
