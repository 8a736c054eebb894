/** Minimal binary PPM (P6, maxval 255) decoder, used to verify client
 * painting against server-rendered images. */

export interface PpmImage {
  width: number;
  height: number;
  /** RGB, row-major. */
  pixels: Uint8Array;
}

export function decodePpm(data: Uint8Array): PpmImage {
  const fields: string[] = [];
  let pos = 0;
  while (fields.length < 4) {
    while (pos < data.length && isSpace(data[pos])) pos++;
    if (data[pos] === 0x23) {
      // comment line
      while (pos < data.length && data[pos] !== 0x0a) pos++;
      continue;
    }
    let token = "";
    while (pos < data.length && !isSpace(data[pos])) {
      token += String.fromCharCode(data[pos++]);
    }
    fields.push(token);
  }
  pos++; // single whitespace after maxval
  const [magic, w, h, maxval] = fields;
  if (magic !== "P6" || maxval !== "255") {
    throw new Error(`unsupported PPM header ${fields.join(" ")}`);
  }
  const width = parseInt(w, 10);
  const height = parseInt(h, 10);
  const pixels = data.subarray(pos, pos + width * height * 3);
  if (pixels.length !== width * height * 3) {
    throw new Error("truncated PPM payload");
  }
  return { width, height, pixels };
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}
