#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ibcd/classifier.hpp"
#include "ibcd/errors.hpp"

namespace ibcd {

/// Classifier backed by a child process speaking newline-delimited JSON:
///   request  {"id": n, "width": W, "height": H, "pixels": [W*H*3 floats]}
///   response {"id": n, "label": l}
/// Masked pixels are rendered as exactly 0.0. Ids must echo; anything else is
/// a bridge error carrying the raw payload. Requests are serialized per
/// process; pool several instances for parallelism.
class ExternalClassifier final : public ClassifierContract {
  public:
    explicit ExternalClassifier(std::vector<std::string> argv,
                                std::chrono::milliseconds timeout = std::chrono::milliseconds(10000))
        : timeout_(timeout) {
        if (argv.empty()) throw invalid_input_error("external classifier needs a command");
        int to_child[2];
        int from_child[2];
        if (pipe(to_child) != 0) throw bridge_error("pipe creation failed");
        if (pipe(from_child) != 0) {
            close(to_child[0]);
            close(to_child[1]);
            throw bridge_error("pipe creation failed");
        }
        pid_ = fork();
        if (pid_ < 0) throw bridge_error("fork failed");
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            std::vector<char*> cargv;
            cargv.reserve(argv.size() + 1);
            for (std::string& arg : argv) cargv.push_back(arg.data());
            cargv.push_back(nullptr);
            execvp(cargv[0], cargv.data());
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        in_fd_ = to_child[1];
        out_fd_ = from_child[0];
    }

    ExternalClassifier(const ExternalClassifier&) = delete;
    ExternalClassifier& operator=(const ExternalClassifier&) = delete;

    ~ExternalClassifier() override {
        if (in_fd_ >= 0) close(in_fd_);
        if (out_fd_ >= 0) close(out_fd_);
        if (pid_ > 0) {
            int status = 0;
            for (int i = 0; i < 50; ++i) {  // ~500 ms of grace after stdin EOF
                if (waitpid(pid_, &status, WNOHANG) != 0) return;
                usleep(10000);
            }
            kill(pid_, SIGKILL);
            waitpid(pid_, &status, 0);
        }
    }

  private:
    Label classify_impl(const Scene& scene, std::span<const Rect> applied_masks) override {
        std::lock_guard<std::mutex> lock(mutex_);
        const long id = next_id_++;
        nlohmann::json request = {
            {"id", id},
            {"width", scene.width},
            {"height", scene.height},
            {"pixels", render_scene(scene, applied_masks)},
        };
        std::string line = request.dump();
        line.push_back('\n');
        write_all(line);
        const std::string payload = read_line();

        nlohmann::json response;
        try {
            response = nlohmann::json::parse(payload);
        } catch (const nlohmann::json::exception&) {
            throw bridge_error("response is not valid JSON", payload);
        }
        if (!response.is_object() || !response.contains("id") || !response.contains("label") ||
            !response["id"].is_number_integer() || !response["label"].is_number_integer())
            throw bridge_error("malformed response object", payload);
        if (response["id"].get<long>() != id)
            throw bridge_error("out-of-order response id", payload);
        return response["label"].get<Label>();
    }

    void write_all(const std::string& data) {
        std::size_t written = 0;
        while (written < data.size()) {
            const ssize_t n = write(in_fd_, data.data() + written, data.size() - written);
            if (n <= 0) throw bridge_error("write to classifier process failed");
            written += static_cast<std::size_t>(n);
        }
    }

    std::string read_line() {
        const auto deadline = std::chrono::steady_clock::now() + timeout_;
        for (;;) {
            const auto newline = buffer_.find('\n');
            if (newline != std::string::npos) {
                std::string line = buffer_.substr(0, newline);
                buffer_.erase(0, newline + 1);
                return line;
            }
            const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (remaining.count() <= 0) throw bridge_error("timeout waiting for response", buffer_);
            pollfd pfd{out_fd_, POLLIN, 0};
            const int ready = poll(&pfd, 1, static_cast<int>(remaining.count()));
            if (ready < 0) throw bridge_error("poll on classifier process failed");
            if (ready == 0) throw bridge_error("timeout waiting for response", buffer_);
            char chunk[4096];
            const ssize_t n = read(out_fd_, chunk, sizeof(chunk));
            if (n <= 0) throw bridge_error("classifier process closed the stream", buffer_);
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    std::chrono::milliseconds timeout_;
    pid_t pid_ = -1;
    int in_fd_ = -1;
    int out_fd_ = -1;
    long next_id_ = 0;
    std::string buffer_;
    std::mutex mutex_;
};

}  // namespace ibcd
