#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace dropkit {

struct MailMessage {
  std::string id;  // draft id; used for file names and Message-ID
  std::string from;
  std::string to;
  std::string subject;
  std::string body;
};

/// RFC 5322 text of a message (CRLF line endings, UTF-8 body).
std::string render_rfc822(const MailMessage& message);

/// Delivers one message and returns a receipt id, or throws TransportError.
class MailSink {
public:
  virtual ~MailSink() = default;
  virtual std::string send(const MailMessage& message) = 0;
  virtual std::string channel() const = 0;
};

/// Writes one `<id>.eml` file per message.
class FileSink : public MailSink {
public:
  explicit FileSink(std::filesystem::path directory);
  std::string send(const MailMessage& message) override;
  std::string channel() const override { return "file"; }
  const std::filesystem::path& directory() const { return directory_; }

private:
  std::filesystem::path directory_;
};

struct SmtpConfig {
  std::string host;
  int port = 587;
  std::string user;
  std::string password;
  std::string from;
  bool tls = true;  // STARTTLS on 587, implicit TLS on 465

  /// DROPKIT_SMTP_HOST, _PORT, _USER, _PASSWORD, _FROM, _TLS (0/1).
  static std::optional<SmtpConfig> from_env();
};

class SmtpSink : public MailSink {
public:
  explicit SmtpSink(SmtpConfig config);
  std::string send(const MailMessage& message) override;
  std::string channel() const override { return "smtp"; }

private:
  SmtpConfig config_;
};

/// Test double: each send consumes the next scripted outcome (true = succeed); after the
/// script runs out, `then` decides.
class ScriptedSink : public MailSink {
public:
  explicit ScriptedSink(std::vector<bool> script, bool then = true);
  std::string send(const MailMessage& message) override;
  std::string channel() const override { return "scripted"; }

  std::vector<MailMessage> delivered() const;
  std::size_t calls() const;

private:
  mutable std::mutex mutex_;
  std::vector<bool> script_;
  bool then_;
  std::size_t calls_ = 0;
  std::vector<MailMessage> delivered_;
};

}  // namespace dropkit
