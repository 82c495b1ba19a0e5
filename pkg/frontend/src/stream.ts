// Incremental parser for multipart/x-mixed-replace camera streams.
// Parts carry a Content-Length header, so framing is exact.

const HEADER_TERMINATOR = "\r\n\r\n";

function concat(a: Uint8Array, b: Uint8Array): Uint8Array {
  const out = new Uint8Array(a.length + b.length);
  out.set(a, 0);
  out.set(b, a.length);
  return out;
}

function indexOfSeq(haystack: Uint8Array, needle: string, from = 0): number {
  outer: for (let i = from; i <= haystack.length - needle.length; i++) {
    for (let j = 0; j < needle.length; j++) {
      if (haystack[i + j] !== needle.charCodeAt(j)) continue outer;
    }
    return i;
  }
  return -1;
}

export async function* multipartParts(
  stream: ReadableStream<Uint8Array>,
): AsyncGenerator<Uint8Array> {
  const reader = stream.getReader();
  let buffer: Uint8Array = new Uint8Array(0);
  const decoder = new TextDecoder();
  try {
    for (;;) {
      const headerEnd = indexOfSeq(buffer, HEADER_TERMINATOR);
      if (headerEnd >= 0) {
        const header = decoder.decode(buffer.subarray(0, headerEnd));
        const match = /content-length:\s*(\d+)/i.exec(header);
        if (!match) throw new Error("multipart part without Content-Length");
        const length = Number(match[1]);
        const bodyStart = headerEnd + HEADER_TERMINATOR.length;
        if (buffer.length >= bodyStart + length) {
          yield buffer.subarray(bodyStart, bodyStart + length);
          buffer = buffer.subarray(bodyStart + length);
          continue;
        }
      }
      const { value, done } = await reader.read();
      if (done) return;
      buffer = concat(buffer, value);
    }
  } finally {
    reader.releaseLock();
  }
}
