#include "nuc/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace nuc {

namespace {

constexpr char kMagic[8] = {'N', 'U', 'C', 'T', 'E', 'N', 'S', '1'};

void put_f32_le(std::string& out, float v) {
  const uint32_t u = std::bit_cast<uint32_t>(v);
  out.push_back(static_cast<char>(u & 0xff));
  out.push_back(static_cast<char>((u >> 8) & 0xff));
  out.push_back(static_cast<char>((u >> 16) & 0xff));
  out.push_back(static_cast<char>((u >> 24) & 0xff));
}

float get_f32_le(const unsigned char* p) {
  const uint32_t u = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                     (static_cast<uint32_t>(p[2]) << 16) |
                     (static_cast<uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(u);
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot open '" + tmp + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw io_error("short write to '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw io_error("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace

void write_tensor(const std::string& path, const Tensor& t, const std::string& name) {
  nlohmann::json header;
  header["shape"] = t.shape();
  header["dtype"] = "f32";
  header["byte_order"] = "LE";
  header["name"] = name;
  std::string htext = header.dump();

  std::string bytes(kMagic, sizeof(kMagic));
  bytes += htext;
  while (bytes.size() % 64 != 0) bytes.push_back(' ');
  bytes.reserve(bytes.size() + 4 * t.data().size());
  for (float v : t.data()) put_f32_le(bytes, v);
  write_file_atomic(path, bytes);
}

NamedTensor read_tensor(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 8 || std::string(bytes.data(), 8) != std::string(kMagic, 8))
    throw io_error("'" + path + "': bad magic at offset 0 (not a tensor container)");

  // The header ends at the first 64-byte boundary where the accumulated text
  // (ignoring the space padding) parses as JSON.
  nlohmann::json header;
  size_t data_off = 0;
  for (size_t end = 64; end <= bytes.size(); end += 64) {
    std::string text = bytes.substr(8, end - 8);
    while (!text.empty() && text.back() == ' ') text.pop_back();
    header = nlohmann::json::parse(text, nullptr, false);
    if (!header.is_discarded()) {
      data_off = end;
      break;
    }
  }
  if (data_off == 0)
    throw io_error("'" + path + "': unterminated JSON header at offset 8");

  if (!header.contains("shape") || !header.contains("dtype"))
    throw io_error("'" + path + "': header missing shape/dtype at offset 8");
  if (header["dtype"] != "f32")
    throw io_error("'" + path + "': unsupported dtype '" +
                   header["dtype"].get<std::string>() + "'");
  if (header.value("byte_order", "LE") != "LE")
    throw io_error("'" + path + "': unsupported byte order");

  std::vector<int> shape = header["shape"].get<std::vector<int>>();
  int64_t numel = 1;
  for (int d : shape) numel *= d;
  const size_t need = data_off + static_cast<size_t>(numel) * 4;
  if (bytes.size() < need)
    throw io_error("'" + path + "': truncated payload at offset " +
                   std::to_string(bytes.size()) + ", expected " + std::to_string(need) +
                   " bytes");

  std::vector<float> data(static_cast<size_t>(numel));
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + data_off;
  for (int64_t i = 0; i < numel; ++i) data[i] = get_f32_le(p + 4 * i);
  return {Tensor::from_data(std::move(shape), std::move(data)),
          header.value("name", "")};
}

void write_pgm(const std::string& path, const Tensor& image) {
  int H, W;
  if (image.rank() == 3 && image.dim(0) == 1) {
    H = image.dim(1);
    W = image.dim(2);
  } else if (image.rank() == 2) {
    H = image.dim(0);
    W = image.dim(1);
  } else {
    throw shape_error("write_pgm: expected [1,H,W] or [H,W], got " +
                      shape_str(image.shape()));
  }
  std::string bytes = "P5\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
  bytes.reserve(bytes.size() + static_cast<size_t>(H) * W);
  for (float v : image.data()) {
    const double r = std::round(static_cast<double>(v));
    bytes.push_back(static_cast<char>(
        static_cast<unsigned char>(std::min(255.0, std::max(0.0, r)))));
  }
  write_file_atomic(path, bytes);
}

Tensor read_pgm(const std::string& path) {
  const std::string bytes = read_file(path);
  size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    const size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])))
      ++pos;
    return bytes.substr(start, pos - start);
  };

  if (next_token() != "P5") throw io_error("'" + path + "': not a binary PGM (P5)");
  const int W = std::stoi(next_token());
  const int H = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (W <= 0 || H <= 0 || maxval != 255)
    throw io_error("'" + path + "': unsupported PGM geometry or maxval");
  ++pos;  // single whitespace after maxval
  if (bytes.size() < pos + static_cast<size_t>(W) * H)
    throw io_error("'" + path + "': truncated PGM payload at offset " +
                   std::to_string(bytes.size()));
  std::vector<float> data(static_cast<size_t>(W) * H);
  for (size_t i = 0; i < data.size(); ++i)
    data[i] = static_cast<float>(static_cast<unsigned char>(bytes[pos + i]));
  return Tensor::from_data({1, H, W}, std::move(data));
}

Tensor read_image_any(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "' for reading");
  char head[2] = {0, 0};
  f.read(head, 2);
  f.close();
  if (head[0] == 'P' && head[1] == '5') return read_pgm(path);
  return read_tensor(path).tensor;
}

}  // namespace nuc
