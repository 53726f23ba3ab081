/**
 * Plain streamed-WAV playback with a single shared audio element, so
 * starting one clip stops the previous one (A/B comparison stays sane).
 */

export class Player {
  private audio: HTMLAudioElement | null = null;
  private currentUrl: string | null = null;

  play(url: string): void {
    if (this.audio && this.currentUrl === url && !this.audio.paused) {
      this.audio.pause();
      return;
    }
    this.stop();
    this.audio = new Audio(url);
    this.currentUrl = url;
    void this.audio.play();
  }

  stop(): void {
    if (this.audio) {
      this.audio.pause();
      this.audio = null;
      this.currentUrl = null;
    }
  }
}
