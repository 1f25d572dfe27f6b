/** Decoder for the PWTC tile-clip container served by /tiles/... .
 *
 * Layout (little endian): "PWTC", version u8, reserved u8, width u16,
 * height u16, frame count u16, then a u32 compressed-length table and one
 * zlib stream per frame inflating to width*height*3 bytes of row-major RGB.
 */

export interface TileClip {
  width: number;
  height: number;
  frames: Uint8Array[]; // RGB, width*height*3 each
}

async function inflate(data: Uint8Array): Promise<Uint8Array> {
  // zlib-wrapped deflate, available in browsers and Node >= 18
  const stream = new Blob([data.slice() as BlobPart])
    .stream()
    .pipeThrough(new DecompressionStream("deflate"));
  return new Uint8Array(await new Response(stream).arrayBuffer());
}

export async function decodeClip(buffer: ArrayBuffer): Promise<TileClip> {
  const view = new DataView(buffer);
  const bytes = new Uint8Array(buffer);
  if (bytes.length < 12 || String.fromCharCode(...bytes.slice(0, 4)) !== "PWTC") {
    throw new Error("not a PWTC clip");
  }
  const version = view.getUint8(4);
  if (version !== 1) throw new Error(`unsupported PWTC version ${version}`);
  const width = view.getUint16(6, true);
  const height = view.getUint16(8, true);
  const count = view.getUint16(10, true);
  const lengths: number[] = [];
  for (let i = 0; i < count; i++) lengths.push(view.getUint32(12 + 4 * i, true));
  let offset = 12 + 4 * count;
  const frames: Uint8Array[] = [];
  for (const length of lengths) {
    const raw = await inflate(bytes.subarray(offset, offset + length));
    if (raw.length !== width * height * 3) {
      throw new Error(`frame inflated to ${raw.length}, expected ${width * height * 3}`);
    }
    frames.push(raw);
    offset += length;
  }
  return { width, height, frames };
}

/** Expand one RGB frame to RGBA for putImageData. */
export function rgbToRgba(rgb: Uint8Array, width: number, height: number): Uint8ClampedArray {
  const out = new Uint8ClampedArray(width * height * 4);
  for (let i = 0, j = 0; i < rgb.length; i += 3, j += 4) {
    out[j] = rgb[i]!;
    out[j + 1] = rgb[i + 1]!;
    out[j + 2] = rgb[i + 2]!;
    out[j + 3] = 255;
  }
  return out;
}
